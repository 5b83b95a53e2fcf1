"""Simulation study: group lasso and sparse group lasso with unbalanced levels.

Every replication draws fresh coefficients, level assignments and noise,
fits each method over its tuning grid on the training set, selects the
grid point with the smallest validation MSPE and records the estimation
error of the sum-to-zero coefficients.

Random streams: replication ``r`` uses ``SeedSequence(seed).spawn(reps)[r]``
with numpy's default PCG64 generator, drawing in the order coefficients,
training assignments, training noise, validation assignments, validation
noise. Results therefore do not depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .design import CategoricalVariable
from .solver import NonConvergenceError, PenaltySpec, QuadraticForm, SolverConfig, fit
from .standardize import build_design

logger = logging.getLogger(__name__)

KAPPAS = tuple(np.arange(-4.0, 5.0 + 1e-9, 0.5))
TAUS = tuple(np.round(np.arange(0.0, 1.0 + 1e-9, 0.1), 10))

SETTING_METHODS = {
    1: ("centering_only", "standardized"),
    2: ("centering_only", "scaling", "svd", "svd_scaling"),
}


class InfeasibleDesignError(ValueError):
    pass


class SimulationError(RuntimeError):
    """One or more replications failed; ``results`` holds the ones that finished."""

    def __init__(self, failures: list[tuple[int, str]], results: list[ReplicationResult]):
        lines = "; ".join(f"replication {r}: {msg}" for r, msg in failures)
        super().__init__(f"{len(failures)} replication(s) failed: {lines}")
        self.failures = failures
        self.results = results


@dataclass(frozen=True)
class SimulationConfig:
    setting: int = 1
    p: int = 10
    L: int = 10
    s: int = 1
    t: float = 2.0 / 3.0
    n_train: int = 1000
    n_val: int = 200
    sigma: float = 0.2
    reps: int = 20
    seed: int = 0
    methods: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.setting not in SETTING_METHODS:
            raise ValueError(f"setting must be 1 or 2, got {self.setting}")
        for name in ("p", "L", "s", "n_train", "n_val", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.s > self.p:
            raise ValueError(f"s = {self.s} exceeds p = {self.p}")
        if not 0.0 < self.t <= 1.0:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.setting == 2 and self.L < 3:
            raise ValueError("setting 2 draws 3-sparse coefficients and needs L >= 3")
        if self.methods is not None:
            unknown = set(self.methods) - set(SETTING_METHODS[self.setting])
            if unknown:
                raise ValueError(f"unknown methods for setting {self.setting}: {sorted(unknown)}")

    @property
    def method_names(self) -> tuple[str, ...]:
        return tuple(self.methods) if self.methods else SETTING_METHODS[self.setting]

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> SimulationConfig:
        """Build from string values, e.g. a parsed ``key = value`` file."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.strip().replace("-", "_")
            if name == "n":
                name = "n_train"
            if name not in types:
                raise ValueError(f"unknown configuration key {key!r}")
            raw = str(raw).strip()
            if name == "methods":
                kwargs[name] = tuple(m.strip() for m in raw.split(",") if m.strip())
            elif name in ("t", "sigma"):
                kwargs[name] = _parse_float(raw)
            else:
                kwargs[name] = int(raw)
        return cls(**kwargs)


def _parse_float(raw: str) -> float:
    if "/" in raw:
        num, den = raw.split("/", 1)
        return float(num) / float(den)
    return float(raw)


@dataclass(frozen=True)
class LambdaGrid:
    kappa: np.ndarray
    group_unscaled: np.ndarray
    group_scaled: np.ndarray
    lasso_unscaled: np.ndarray
    lasso_scaled: np.ndarray
    tau: np.ndarray


@dataclass(frozen=True)
class Dataset:
    variables: list[CategoricalVariable]
    y: np.ndarray


@dataclass(frozen=True)
class ReplicationResult:
    method: str
    replication: int
    kappa: float
    tau: float
    val_mspe: float
    est_error: float
    max_kkt: float = field(default=0.0, compare=False)


def level_counts(t: float, L: int, n: int) -> np.ndarray:
    """Level frequencies proportional to ``t**l``, rounded by largest remainder."""
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    if n < L:
        raise InfeasibleDesignError(f"n = {n} is smaller than L = {L}")
    weights = t ** np.arange(1, L + 1, dtype=float)
    quota = n * weights / weights.sum()
    counts = np.floor(quota).astype(np.int64)
    short = n - int(counts.sum())
    # Stable sort: ties go to the lower level.
    order = np.argsort(-(quota - counts), kind="stable")
    counts[order[:short]] += 1
    if np.any(counts == 0):
        raise InfeasibleDesignError(
            f"level(s) {list(np.flatnonzero(counts == 0) + 1)} get no observations "
            f"for t={t}, L={L}, n={n}"
        )
    return counts


def gen_beta_star(setting: int, s: int, p: int, L: int, rng) -> list[np.ndarray]:
    """True coefficients: unit-norm blocks for the first ``s`` variables, zero after.

    Setting 1 centers a Gaussian draw before normalizing. Setting 2 keeps
    three uniformly chosen entries of the draw and normalizes without
    re-centering.
    """
    beta = []
    for j in range(p):
        if j >= s:
            beta.append(np.zeros(L))
            continue
        u = rng.standard_normal(L)
        if setting == 1:
            u = u - u.mean()
        else:
            keep = rng.choice(L, size=3, replace=False)
            mask = np.zeros(L, dtype=bool)
            mask[keep] = True
            u = np.where(mask, u, 0.0)
        beta.append(u / np.linalg.norm(u))
    return beta


def _assign(counts: np.ndarray, rng) -> np.ndarray:
    levels = np.repeat(np.arange(1, counts.size + 1), counts)
    return rng.permutation(levels)


def _draw(counts, beta_star, sigma, rng) -> Dataset:
    variables = [
        CategoricalVariable(_assign(counts, rng), counts.size, name=f"x{j + 1}")
        for j in range(len(beta_star))
    ]
    n = int(counts.sum())
    signal = np.zeros(n)
    for var, b in zip(variables, beta_star):
        signal += b[var.codes - 1]
    y = signal + sigma * rng.standard_normal(n)
    return Dataset(variables, y)


def gen_dataset(cfg: SimulationConfig, counts, beta_star, rng) -> tuple[Dataset, Dataset]:
    """Training set with the given level counts and a validation set of size ``n_val``.

    The validation counts follow the same ``t**l`` design.
    """
    counts = np.asarray(counts, dtype=np.int64)
    train = _draw(counts, beta_star, cfg.sigma, rng)
    val_counts = level_counts(cfg.t, counts.size, cfg.n_val)
    val = _draw(val_counts, beta_star, cfg.sigma, rng)
    return train, val


def lambda_grids(n: int, p: int, L: int, sigma: float) -> LambdaGrid:
    """Tuning grids for unscaled ("w/o") and column-scaled ("w/") designs (natural logs)."""
    kappa = np.array(KAPPAS)
    base = sigma * 2.0**kappa
    group = base * (np.sqrt(L / n) + np.sqrt(np.log(p) / n))
    lasso = base * np.sqrt(np.log(p * L) / n)
    root = np.sqrt(n)
    return LambdaGrid(
        kappa=kappa,
        group_unscaled=group,
        group_scaled=group / root,
        lasso_unscaled=lasso,
        lasso_scaled=lasso / root,
        tau=np.array(TAUS),
    )


@dataclass(frozen=True)
class _Method:
    standardized: bool
    variant: str
    group_scaled: bool
    lasso_scaled: bool
    group_weights: bool = False


_METHODS = {
    (1, "centering_only"): _Method(False, "sgl_centering_only", False, False, True),
    (1, "standardized"): _Method(True, "group_only", True, True),
    (2, "centering_only"): _Method(False, "sgl_centering_only", False, False),
    (2, "scaling"): _Method(True, "sgl_scaling", True, True),
    (2, "svd"): _Method(False, "sgl_svd", True, False),
    (2, "svd_scaling"): _Method(True, "sgl_svd_scaling", True, True),
}


def predict(design, fit_result, variables: Sequence[CategoricalVariable]) -> np.ndarray:
    """Predictions for new observations of the same variables (main effects only)."""
    eta = np.full(variables[0].n, fit_result.intercept)
    for blk, theta, var in zip(design.blocks, fit_result.theta, variables):
        eta += blk.predict(var.codes, theta)
    return eta


def estimation_error(theta_hat: Sequence[np.ndarray], beta_star: Sequence[np.ndarray]) -> float:
    """``||theta_hat - theta_star||_2`` over all blocks, ``theta_star`` the centered truth."""
    diff = [np.asarray(t) - (b - b.mean()) for t, b in zip(theta_hat, beta_star)]
    return float(np.linalg.norm(np.concatenate(diff)))


def select_by_validation(cfg: SimulationConfig, method: str, train: Dataset, val: Dataset,
                         beta_star, grid: LambdaGrid,
                         solver_cfg: SolverConfig | None = None) -> ReplicationResult:
    """Fit ``method`` over its grid and keep the fit with the smallest validation MSPE."""
    spec = _METHODS[(cfg.setting, method)]
    design = build_design(train.variables, standardized=spec.standardized)
    quad = QuadraticForm(design, train.y)
    lams = grid.group_scaled if spec.group_scaled else grid.group_unscaled
    lassos = grid.lasso_scaled if spec.lasso_scaled else grid.lasso_unscaled
    weights = tuple(np.sqrt(design.df)) if spec.group_weights else None
    taus = [1.0] if cfg.setting == 1 else list(grid.tau)
    best = None
    max_kkt = 0.0
    for tau in taus:
        init = None
        # Largest penalty first so each fit warm-starts from a sparser one.
        for k in range(len(grid.kappa) - 1, -1, -1):
            penalty = PenaltySpec(float(lams[k]), float(tau), float(lassos[k]), spec.variant,
                                  weights)
            result = fit(design, train.y, penalty, solver_cfg, init=init, quad=quad)
            init = result.coef
            max_kkt = max(max_kkt, result.kkt)
            mspe = float(np.mean((val.y - predict(design, result, val.variables)) ** 2))
            key = (mspe, float(tau), float(grid.kappa[k]))
            if best is None or key < best[0]:
                best = (key, result)
    (mspe, tau, kappa), result = best
    return ReplicationResult(method, -1, kappa, tau, mspe,
                             estimation_error(result.theta, beta_star), max_kkt)


def run_replication(cfg: SimulationConfig, replication: int,
                    solver_cfg: SolverConfig | None = None) -> list[ReplicationResult]:
    seq = np.random.SeedSequence(cfg.seed).spawn(cfg.reps)[replication]
    rng = np.random.default_rng(seq)
    beta_star = gen_beta_star(cfg.setting, cfg.s, cfg.p, cfg.L, rng)
    counts = level_counts(cfg.t, cfg.L, cfg.n_train)
    train, val = gen_dataset(cfg, counts, beta_star, rng)
    grid = lambda_grids(cfg.n_train, cfg.p, cfg.L, cfg.sigma)
    out = []
    for method in cfg.method_names:
        res = select_by_validation(cfg, method, train, val, beta_star, grid, solver_cfg)
        out.append(ReplicationResult(res.method, replication, res.kappa, res.tau,
                                     res.val_mspe, res.est_error, res.max_kkt))
    return out


def _run_one(args):
    cfg, r, solver_cfg = args
    try:
        return r, run_replication(cfg, r, solver_cfg), None
    except NonConvergenceError as exc:
        return r, [], str(exc)


def run_setting(cfg: SimulationConfig, jobs: int = 1,
                solver_cfg: SolverConfig | None = None) -> list[ReplicationResult]:
    """All replications of one configuration, ordered by replication then method.

    Raises:
        SimulationError: if any replication hit a solver failure; the
            completed replications are attached.
    """
    tasks = [(cfg, r, solver_cfg) for r in range(cfg.reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    outcomes.sort(key=lambda o: o[0])
    order = {m: i for i, m in enumerate(cfg.method_names)}
    results = sorted((res for _, rs, _ in outcomes for res in rs),
                     key=lambda res: (res.replication, order[res.method]))
    failures = [(r, msg) for r, _, msg in outcomes if msg is not None]
    if failures:
        raise SimulationError(failures, results)
    return results


def summarize(results: Iterable[ReplicationResult]) -> list[dict]:
    """Five-number summary of estimation errors per method (linear quantiles)."""
    by_method: dict[str, list[float]] = {}
    for res in results:
        by_method.setdefault(res.method, []).append(res.est_error)
    if not by_method:
        raise ValueError("no results to summarize")
    rows = []
    for method, errors in by_method.items():
        q = np.quantile(np.asarray(errors), [0.0, 0.25, 0.5, 0.75, 1.0])
        rows.append({"method": method, "count": len(errors), "min": q[0], "q1": q[1],
                     "median": q[2], "q3": q[3], "max": q[4]})
    return rows


def _fmt(x) -> str:
    return format(x, ".17g") if isinstance(x, float) else str(x)


RESULT_COLUMNS = ("method", "replication", "kappa", "tau", "val_mspe", "est_error")
SUMMARY_COLUMNS = ("method", "count", "min", "q1", "median", "q3", "max")


def write_results(results: Iterable[ReplicationResult], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for res in results:
        writer.writerow([_fmt(getattr(res, c)) for c in RESULT_COLUMNS])


def write_summary(rows: Iterable[Mapping], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(float(row[c]) if c not in ("method", "count") else row[c])
                         for c in SUMMARY_COLUMNS])
