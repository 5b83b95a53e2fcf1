"""Least-squares group lasso and sparse group lasso over categorical blocks.

All solvers minimize

    (1/n) ||y - b0 - sum_j B_j beta_j||^2
        + sum_j { a_j ||A_j beta_j||_2 + b ||beta_j||_1 }

with ``a_j = lam * w_j`` (group lasso) or ``tau * lam * w_j`` (sparse group
lasso) and ``b = (1 - tau) * lam_lasso``. The blocks are centered, so the
intercept is ``mean(y)`` and the remaining problem is a quadratic in
``beta``; iterations only touch ``G = B'B`` and ``c = B'(y - mean(y))``.

Three algorithms are used:

* ``group_only`` on standardized blocks: block coordinate descent with a
  closed-form block update, since every block Gram is an orthogonal
  projector and the block gradient lies in its range.
* penalties with ``A_j = I``: monotone FISTA with restarts.
* penalties on the fit (``A_j = B_j``): ADMM with splitting ``w_j = C_j beta_j``
  and ``v = beta``, where ``C_j' C_j = B_j' B_j``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .design import GroupedDesign

logger = logging.getLogger(__name__)

VARIANTS = (
    "group_only",
    "sgl_scaling",
    "sgl_svd",
    "sgl_svd_scaling",
    "sgl_centering_only",
)
_FIT_PENALTY = {"sgl_svd", "sgl_svd_scaling"}
_NEEDS_STANDARDIZED = {"group_only": True, "sgl_scaling": True, "sgl_svd_scaling": True,
                       "sgl_svd": False, "sgl_centering_only": False}


class NonConvergenceError(RuntimeError):
    """The solver hit its iteration limit; ``fit`` holds the last iterate."""

    def __init__(self, message: str, fit: FitResult):
        super().__init__(message)
        self.fit = fit


@dataclass(frozen=True)
class PenaltySpec:
    """Regularization parameters and formulation.

    ``weights`` multiply the group term of each block. They default to
    ``sqrt(df_j)`` for ``group_only`` and to 1 for the sparse group variants.
    ``tau`` and ``lam_lasso`` are ignored by ``group_only``.
    """

    lam: float
    tau: float = 1.0
    lam_lasso: float = 0.0
    variant: str = "group_only"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if not (np.isfinite(self.lam_lasso) and self.lam_lasso >= 0):
            raise ValueError(f"lam_lasso must be finite and >= 0, got {self.lam_lasso}")
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if any(not w > 0 for w in weights):
                raise ValueError("block weights must be positive")
            object.__setattr__(self, "weights", weights)

    def block_weights(self, design: GroupedDesign) -> np.ndarray:
        if self.weights is not None:
            if len(self.weights) != len(design):
                raise ValueError(
                    f"{len(self.weights)} weights given for {len(design)} blocks"
                )
            return np.asarray(self.weights)
        if self.variant == "group_only":
            return np.sqrt(design.df)
        return np.ones(len(design))

    def group_levels(self, design: GroupedDesign) -> np.ndarray:
        """Multipliers ``a_j`` of the group norms."""
        scale = self.lam if self.variant == "group_only" else self.tau * self.lam
        return scale * self.block_weights(design)

    @property
    def l1_level(self) -> float:
        if self.variant == "group_only":
            return 0.0
        return (1.0 - self.tau) * self.lam_lasso

    @property
    def penalizes_fit(self) -> bool:
        return self.variant in _FIT_PENALTY


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and tolerances.

    A fit is declared converged once the relative objective change is at most
    ``tol`` and the KKT residual is at most ``kkt_tol``. ADMM additionally
    requires relative primal and dual residuals below ``admm_tol``.
    """

    max_iter: int = 10_000
    tol: float = 1e-10
    kkt_tol: float = 1e-7
    rho: float = 1.0
    admm_tol: float = 1e-8
    admm_max_iter: int = 50_000

    def __post_init__(self):
        if self.max_iter < 1 or self.admm_max_iter < 1:
            raise ValueError("iteration limits must be positive")
        if min(self.tol, self.kkt_tol, self.rho, self.admm_tol) <= 0:
            raise ValueError("tolerances and rho must be positive")


@dataclass
class FitResult:
    intercept: float
    beta: list[np.ndarray]
    theta: list[np.ndarray]
    objective: list[float]
    n_iter: int
    kkt: float
    converged: bool
    variant: str
    labels: list[str] = field(default_factory=list)
    group_duals: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate(self.beta)

    def fitted(self, design: GroupedDesign) -> np.ndarray:
        return self.intercept + design.dense() @ self.coef


class QuadraticForm:
    """Sufficient statistics of the least-squares loss for one ``(design, y)``."""

    def __init__(self, design: GroupedDesign, y):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size != design.n:
            raise ValueError(f"y must have length {design.n}, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        self.design = design
        self.n = design.n
        self.slices = design.slices
        self.sizes = np.array(design.sizes)
        self.starts = np.array([s.start for s in self.slices])
        b = design.dense()
        self.ybar = float(y.mean())
        yc = y - self.ybar
        self.yy = float(yc @ yc)
        self.G = b.T @ b
        self.c = b.T @ yc
        self._roots: list[np.ndarray] | None = None
        self._lip: float | None = None

    @property
    def lipschitz(self) -> float:
        if self._lip is None:
            top = linalg.eigvalsh(self.G, subset_by_index=[self.G.shape[0] - 1] * 2)
            self._lip = max(2.0 * float(top[-1]) / self.n, 1e-300)
        return self._lip

    def block_roots(self) -> list[np.ndarray]:
        """Square roots ``C_j`` with ``C_j' C_j = G_jj`` (one row per nonzero eigenvalue)."""
        if self._roots is None:
            roots = []
            for sl in self.slices:
                evals, evecs = linalg.eigh(self.G[sl, sl])
                keep = evals > 1e-12 * max(float(evals[-1]), 1e-300)
                roots.append(np.sqrt(evals[keep])[:, None] * evecs[:, keep].T)
            self._roots = roots
        return self._roots

    def loss(self, beta: np.ndarray) -> float:
        return max((self.yy - 2.0 * self.c @ beta + beta @ (self.G @ beta)) / self.n, 0.0)

    def grad(self, beta: np.ndarray) -> np.ndarray:
        return 2.0 * (self.G @ beta - self.c) / self.n


def soft_threshold(g, t: float) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return np.sign(g) * np.maximum(np.abs(g) - t, 0.0)


def group_soft_threshold(g, t: float) -> np.ndarray:
    """Proximal map of ``t ||.||_2``: ``(1 - t / ||g||)_+ g``."""
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm <= t:
        return np.zeros_like(g)
    return (1.0 - t / norm) * g


def sparse_group_prox(g, t1: float, t2: float) -> np.ndarray:
    """Proximal map of ``t1 ||.||_1 + t2 ||.||_2``.

    Soft-thresholding coordinatewise and then shrinking the group is exact
    for this sum.
    """
    return group_soft_threshold(soft_threshold(g, t1), t2)


def _group_shrink(x: np.ndarray, levels: np.ndarray, quad: QuadraticForm) -> np.ndarray:
    """Blockwise ``group_soft_threshold`` with per-block thresholds ``levels``."""
    norms = np.sqrt(np.add.reduceat(x * x, quad.starts))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > levels, 1.0 - levels / norms, 0.0)
    return x * np.repeat(factor, quad.sizes)


def _split(beta: np.ndarray, quad: QuadraticForm) -> list[np.ndarray]:
    return [beta[sl].copy() for sl in quad.slices]


def _penalty(beta: np.ndarray, quad: QuadraticForm, levels: np.ndarray, l1: float,
             on_fit: bool) -> float:
    if on_fit:
        sq = [float(beta[sl] @ quad.G[sl, sl] @ beta[sl]) for sl in quad.slices]
        norms = np.sqrt(np.maximum(sq, 0.0))
    else:
        norms = np.sqrt(np.add.reduceat(beta * beta, quad.starts))
    return float(levels @ norms) + l1 * float(np.abs(beta).sum())


def objective(design: GroupedDesign, y, fit: FitResult, penalty: PenaltySpec,
              quad: QuadraticForm | None = None) -> float:
    """Objective value of ``fit`` including the (possibly suboptimal) intercept."""
    quad = quad or QuadraticForm(design, y)
    beta = fit.coef
    offset = quad.ybar - fit.intercept
    loss = quad.loss(beta) + offset * offset
    return loss + _penalty(beta, quad, penalty.group_levels(design), penalty.l1_level,
                           penalty.penalizes_fit)


def _l1_distance(h: np.ndarray, beta: np.ndarray, b: float) -> np.ndarray:
    """Componentwise distance of ``h`` to ``b * subdiff ||.||_1`` at ``beta``."""
    nz = beta != 0
    out = soft_threshold(h, b)
    out[nz] = h[nz] - b * np.sign(beta[nz])
    return out


def _ball_distance(q, beta, a, b, root, start=None, iters=500):
    """Distance from ``q`` to ``{a C'eta : ||eta|| <= 1} + b subdiff ||beta||_1``.

    Used when ``C beta = 0``; minimized over the unit ball by accelerated
    projected gradient. Any feasible ``eta`` gives an upper bound, so the
    returned value is a valid certificate even before full convergence.
    """
    step = 1.0 / max(a * a * float(np.linalg.norm(root, 2)) ** 2, 1e-300)
    eta = np.zeros(root.shape[0]) if start is None else np.array(start, dtype=float)
    nrm = np.linalg.norm(eta)
    if nrm > 1:
        eta /= nrm
    best = float(np.linalg.norm(_l1_distance(q - a * root.T @ eta, beta, b)))
    prev, t = eta.copy(), 1.0
    for _ in range(iters):
        if best <= 1e-15:
            break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = eta + ((t - 1.0) / t_next) * (eta - prev)
        r = _l1_distance(q - a * root.T @ mom, beta, b)
        new = mom + step * a * (root @ r)
        nrm = np.linalg.norm(new)
        if nrm > 1:
            new /= nrm
        prev, eta, t = eta, new, t_next
        val = float(np.linalg.norm(_l1_distance(q - a * root.T @ eta, beta, b)))
        if val < best:
            best = val
        else:
            t = 1.0
    return best


def _block_kkt(q, beta, a, b, root=None, start=None) -> float:
    if a == 0.0:
        return float(np.linalg.norm(_l1_distance(q, beta, b)))
    if root is None:
        norm = float(np.linalg.norm(beta))
        if norm > 0:
            return float(np.linalg.norm(_l1_distance(q - a * beta / norm, beta, b)))
        return max(float(np.linalg.norm(soft_threshold(q, b))) - a, 0.0)
    cb = root @ beta
    norm = float(np.linalg.norm(cb))
    if norm > 1e-12 * float(np.linalg.norm(root, 2)) * float(np.linalg.norm(beta)):
        return float(np.linalg.norm(_l1_distance(q - a * root.T @ (cb / norm), beta, b)))
    return _ball_distance(q, beta, a, b, root, start=start)


def kkt_residual(design: GroupedDesign, y, fit: FitResult, penalty: PenaltySpec,
                 quad: QuadraticForm | None = None) -> float:
    """Largest blockwise distance of the negative gradient to the penalty subdifferential.

    The intercept contributes the absolute value of its partial derivative.
    Zero at an exact minimizer.
    """
    quad = quad or QuadraticForm(design, y)
    beta = fit.coef
    neg_grad = -quad.grad(beta)
    levels = penalty.group_levels(design)
    l1 = penalty.l1_level
    roots = quad.block_roots() if penalty.penalizes_fit else None
    worst = 2.0 * abs(quad.ybar - fit.intercept)
    for j, sl in enumerate(quad.slices):
        start = None if fit.group_duals is None else fit.group_duals[j]
        res = _block_kkt(neg_grad[sl], beta[sl], float(levels[j]), l1,
                         None if roots is None else roots[j], start)
        worst = max(worst, res)
    return worst


def _result(quad, beta, trace, n_iter, kkt, converged, penalty, duals=None) -> FitResult:
    blocks = _split(beta, quad)
    design = quad.design
    return FitResult(
        intercept=quad.ybar,
        beta=blocks,
        theta=[blk.theta(bj) for blk, bj in zip(design.blocks, blocks)],
        objective=trace,
        n_iter=n_iter,
        kkt=kkt,
        converged=converged,
        variant=penalty.variant,
        labels=[blk.label for blk in design.blocks],
        group_duals=duals,
    )


def _check_blocks(design: GroupedDesign, variant: str) -> None:
    want = _NEEDS_STANDARDIZED[variant]
    for blk in design.blocks:
        if bool(blk.standardized) != want:
            kind = "standardized" if want else "centering-only"
            raise ValueError(f"variant {variant!r} needs {kind} blocks; {blk.label!r} is not")


def _initial(init, quad: QuadraticForm) -> np.ndarray:
    p = int(quad.sizes.sum())
    if init is None:
        return np.zeros(p)
    beta = np.concatenate([np.ravel(b) for b in init]) if isinstance(init, list) else np.asarray(init, dtype=float).copy()
    if beta.shape != (p,):
        raise ValueError(f"initial coefficients must have length {p}")
    return beta


def _finish(fit: FitResult, cfg: SolverConfig, what: str) -> FitResult:
    if not fit.converged:
        raise NonConvergenceError(
            f"{what} did not converge in {fit.n_iter} iterations (KKT residual {fit.kkt:.3g})",
            fit,
        )
    return fit


def fit_group_lasso(design: GroupedDesign, y, penalty: PenaltySpec,
                    cfg: SolverConfig | None = None, *, init=None,
                    quad: QuadraticForm | None = None) -> FitResult:
    """Group lasso on standardized blocks by exact block coordinate descent.

    Each block Gram ``G_jj`` is an orthogonal projector whose range contains
    the block gradient, so minimizing over block ``j`` is a single group
    soft-threshold of ``q_j = c_j - sum_{k != j} G_jk beta_k``. The result
    is orthogonal to the block's null space.
    """
    cfg = cfg or SolverConfig()
    if penalty.variant != "group_only":
        raise ValueError("fit_group_lasso handles variant 'group_only' only")
    _check_blocks(design, "group_only")
    quad = quad or QuadraticForm(design, y)
    G, c, n = quad.G, quad.c, quad.n
    for blk, sl in zip(design.blocks, quad.slices):
        gjj = G[sl, sl]
        if np.abs(gjj @ gjj - gjj).max() > 1e-8:
            raise ValueError(f"block {blk.label!r} has a Gram matrix that is not a projector")

    levels = penalty.group_levels(design)
    if not np.any(levels):
        return _unpenalized(quad, design, y, penalty)
    thresh = 0.5 * n * levels
    beta = _initial(init, quad)
    gb = G @ beta
    pen = lambda b: _penalty(b, quad, levels, 0.0, False)
    trace = [quad.loss(beta) + pen(beta)]
    kkt, converged, it = np.inf, False, 0
    for it in range(1, cfg.max_iter + 1):
        step = 0.0
        for j, sl in enumerate(quad.slices):
            old = beta[sl]
            q = c[sl] - gb[sl] + G[sl, sl] @ old
            new = group_soft_threshold(q, thresh[j])
            delta = new - old
            if np.any(delta):
                gb += G[:, sl] @ delta
                beta[sl] = new
                step = max(step, float(np.abs(delta).max()))
        value = quad.loss(beta) + pen(beta)
        change = abs(trace[-1] - value) / max(abs(value), 1e-300)
        trace.append(value)
        # Sweeps are cheap, so also wait for the coefficients to settle.
        if change <= cfg.tol and step <= cfg.tol * max(1.0, float(np.abs(beta).max())):
            fit = _result(quad, beta, trace, it, 0.0, False, penalty)
            kkt = kkt_residual(design, y, fit, penalty, quad)
            if kkt <= cfg.kkt_tol:
                converged = True
                break
    else:
        fit = _result(quad, beta, trace, it, 0.0, False, penalty)
        kkt = kkt_residual(design, y, fit, penalty, quad)
    fit = _result(quad, beta, trace, it, kkt, converged, penalty)
    return _finish(fit, cfg, "block coordinate descent")


def _fit_apg(quad, design, y, penalty, cfg, beta) -> FitResult:
    """Monotone FISTA with restart for penalties that depend on ``beta`` only."""
    levels = penalty.group_levels(design)
    l1 = penalty.l1_level
    lip = quad.lipschitz
    step = 1.0 / lip

    def prox(x):
        return _group_shrink(soft_threshold(x, step * l1), step * levels, quad)

    def total(b):
        return quad.loss(b) + _penalty(b, quad, levels, l1, False)

    x = beta
    x_prev = x.copy()
    yk = x.copy()
    t = 1.0
    value = total(x)
    trace = [value]
    kkt, converged, it = np.inf, False, 0
    for it in range(1, cfg.max_iter + 1):
        z = prox(yk - step * quad.grad(yk))
        fz = total(z)
        x_prev = x
        # Near the optimum decreases fall below rounding error in the objective;
        # a step within that noise is still taken.
        accept = fz <= value + 1e-14 * abs(value)
        if accept:
            x = z
            change = abs(value - fz) / max(abs(fz), 1e-300)
            value = fz
        else:
            change = 0.0
        trace.append(value)
        if not accept:
            # Objective went up: drop momentum.
            t = 1.0
            yk = x.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            yk = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
        if change <= cfg.tol or it % 25 == 0:
            fit = _result(quad, x, trace, it, 0.0, False, penalty)
            kkt = kkt_residual(design, y, fit, penalty, quad)
            if kkt <= cfg.kkt_tol and change <= cfg.tol:
                converged = True
                break
            if kkt <= 1e-3 * cfg.kkt_tol:
                converged = True
                break
    return _result(quad, x, trace, it, kkt, converged, penalty)


def _admm_candidate(quad, design, y, penalty, v, w, row_slices, duals, it):
    """Primal point read off the ADMM iterates, with its KKT residual.

    ``||C_j beta_j||`` reaches zero only in the limit, so blocks whose
    split variable is nearly zero are also tried at exactly zero; the
    version with the smaller residual wins.
    """
    norms = np.array([np.linalg.norm(w[rs]) for rs in row_slices])
    top = norms.max(initial=0.0)
    best = None
    for cut in (0.0, 1e-4 * top):
        cand = v.copy()
        for j in np.flatnonzero(norms <= cut):
            cand[quad.slices[j]] = 0.0
        if best is not None and np.array_equal(cand, best[0]):
            continue
        fit = _result(quad, cand, [], it, 0.0, False, penalty, duals)
        kkt = kkt_residual(design, y, fit, penalty, quad)
        if best is None or kkt < best[1]:
            best = (cand, kkt)
    return best


def _fit_admm(quad, design, y, penalty, cfg, beta) -> FitResult:
    """ADMM for ``a_j ||C_j beta_j|| + b ||beta||_1`` with residual balancing."""
    levels = penalty.group_levels(design)
    l1 = penalty.l1_level
    n = quad.n
    # Unit spectral norm per block keeps both constraints on the same scale.
    units = np.array([1.0 / max(float(np.linalg.norm(r, 2)), 1e-300) if r.size else 1.0
                      for r in quad.block_roots()])
    roots = [u_j * r for u_j, r in zip(units, quad.block_roots())]
    levels = levels / units
    C = linalg.block_diag(*roots)
    row_sizes = np.array([r.shape[0] for r in roots])
    row_starts = np.concatenate([[0], np.cumsum(row_sizes)[:-1]])
    row_slices = [slice(int(a), int(a + k)) for a, k in zip(row_starts, row_sizes)]
    ctc = C.T @ C
    eye = np.eye(C.shape[1])
    hess = 2.0 * quad.G / n
    lin = 2.0 * quad.c / n

    def shrink_rows(x, thr):
        norms = np.sqrt(np.add.reduceat(x * x, row_starts)) if x.size else np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(norms > thr, 1.0 - thr / norms, 0.0)
        return x * np.repeat(factor, row_sizes)

    def total(b):
        return quad.loss(b) + _penalty(b, quad, levels, l1, True)

    # Start rho near the curvature of the loss; residual balancing adapts it.
    rho = cfg.rho * max(float(np.trace(hess)) / hess.shape[0], 1e-12)
    factor = linalg.cho_factor(hess + rho * (ctc + eye))
    w = C @ beta
    v = beta.copy()
    u = np.zeros_like(w)
    z = np.zeros_like(v)
    trace = [total(beta)]
    kkt, converged, it = np.inf, False, 0
    candidate = beta.copy()
    tol = cfg.admm_tol
    relax = 1.6
    for it in range(1, cfg.admm_max_iter + 1):
        beta = linalg.cho_solve(factor, lin + rho * (C.T @ (w - u) + (v - z)))
        cb = C @ beta
        w_old, v_old = w, v
        cb_hat = relax * cb + (1.0 - relax) * w_old
        beta_hat = relax * beta + (1.0 - relax) * v_old
        w = shrink_rows(cb_hat + u, levels / rho)
        v = soft_threshold(beta_hat + z, l1 / rho)
        u = u + cb_hat - w
        z = z + beta_hat - v
        r_w, r_v = cb - w, beta - v
        if it % 10 and it > 1:
            continue
        primal = np.sqrt(r_w @ r_w + r_v @ r_v)
        dual = rho * np.linalg.norm(C.T @ (w - w_old) + (v - v_old))
        pri_scale = max(np.sqrt(cb @ cb + beta @ beta), np.sqrt(w @ w + v @ v), 1e-300)
        dual_scale = max(rho * np.linalg.norm(C.T @ u + z), 1e-300)
        rel_p, rel_d = primal / pri_scale, dual / dual_scale
        strict = it % 100 == 0
        if (rel_p <= tol and rel_d <= tol) or strict:
            duals = [rho * u[rs] / levels[j] if levels[j] > 0 else None
                     for j, rs in enumerate(row_slices)]
            candidate, kkt = _admm_candidate(quad, design, y, penalty, v, w, row_slices,
                                             duals, it)
            trace.append(total(candidate))
            if rel_p <= tol and rel_d <= tol:
                if kkt <= cfg.kkt_tol:
                    converged = True
                    break
                tol *= 0.1
            elif kkt <= 1e-3 * cfg.kkt_tol:
                # Residuals are relative and degenerate at an all-zero solution.
                converged = True
                break
        if rel_p > 10.0 * rel_d:
            rho *= 2.0
            u, z = u / 2.0, z / 2.0
        elif rel_d > 10.0 * rel_p:
            rho /= 2.0
            u, z = u * 2.0, z * 2.0
        else:
            continue
        factor = linalg.cho_factor(hess + rho * (ctc + eye))
    if not converged:
        duals = [rho * u[rs] / levels[j] if levels[j] > 0 else None
                 for j, rs in enumerate(row_slices)]
        candidate, kkt = _admm_candidate(quad, design, y, penalty, v, w, row_slices,
                                         duals, it)
        trace.append(total(candidate))
        return _result(quad, candidate, trace, it, kkt, False, penalty, duals)
    return _result(quad, candidate, trace, it, kkt, True, penalty, duals)


def _unpenalized(quad, design, y, penalty) -> FitResult:
    """Minimum-norm least squares; exact where iterative solvers crawl on ill-conditioned codings."""
    beta = linalg.lstsq(quad.G, quad.c, cond=1e-12)[0]
    fit = _result(quad, beta, [], 1, 0.0, False, penalty)
    kkt = kkt_residual(design, y, fit, penalty, quad)
    value = quad.loss(beta)
    return _result(quad, beta, [value], 1, kkt, True, penalty)


def fit_sparse_group_lasso(design: GroupedDesign, y, penalty: PenaltySpec,
                           cfg: SolverConfig | None = None, *, init=None,
                           quad: QuadraticForm | None = None) -> FitResult:
    """Sparse group lasso in one of the four formulations.

    ``sgl_scaling`` and ``sgl_centering_only`` penalize ``||beta_j||_2`` and
    are solved by accelerated proximal gradient. ``sgl_svd`` and
    ``sgl_svd_scaling`` penalize ``||B_j beta_j||_2`` and go through ADMM
    (unless ``tau = 0``, where the group term vanishes).
    """
    cfg = cfg or SolverConfig()
    if penalty.variant == "group_only":
        raise ValueError("use fit_group_lasso for variant 'group_only'")
    _check_blocks(design, penalty.variant)
    quad = quad or QuadraticForm(design, y)
    beta = _initial(init, quad)
    if not np.any(penalty.group_levels(design)) and penalty.l1_level == 0.0:
        return _unpenalized(quad, design, y, penalty)
    if penalty.penalizes_fit and penalty.tau > 0:
        fit = _fit_admm(quad, design, y, penalty, cfg, beta)
        return _finish(fit, cfg, "ADMM")
    fit = _fit_apg(quad, design, y, penalty, cfg, beta)
    return _finish(fit, cfg, "proximal gradient")


def fit(design: GroupedDesign, y, penalty: PenaltySpec, cfg: SolverConfig | None = None,
        **kwargs) -> FitResult:
    if penalty.variant == "group_only":
        return fit_group_lasso(design, y, penalty, cfg, **kwargs)
    return fit_sparse_group_lasso(design, y, penalty, cfg, **kwargs)


def lambda_max(design: GroupedDesign, y, weights=None) -> float:
    """Smallest group lasso ``lam`` at which every block is zero."""
    quad = QuadraticForm(design, y)
    weights = np.sqrt(design.df) if weights is None else np.asarray(weights, dtype=float)
    norms = np.array([np.linalg.norm(quad.c[sl]) for sl in quad.slices])
    return float(np.max(2.0 * norms / (quad.n * weights)))
