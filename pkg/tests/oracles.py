"""Reference computations that share no code path with the package solvers."""

import numpy as np


def dummies(codes, L):
    x = np.zeros((len(codes), L))
    x[np.arange(len(codes)), np.asarray(codes) - 1] = 1.0
    return x


def ols_fitted(y, mats):
    """Least-squares fitted values of ``y`` on ``[1 | mats...]`` (min-norm solve)."""
    a = np.hstack([np.ones((len(y), 1))] + list(mats))
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return a @ coef


def centered_svd_basis(x):
    """Orthonormal basis of range(Pi x) from an SVD."""
    xc = x - x.mean(axis=0)
    u, sv, _ = np.linalg.svd(xc, full_matrices=False)
    return u[:, sv > 1e-9 * sv[0]]


def orthonormal_group_lasso(y, bases, lam, weights, iters=200_000, tol=1e-15):
    """Group lasso over orthonormal blocks ``U_j`` by cyclic exact block minimization.

    Minimizes ``(1/n)||y - a0 - sum U_j a_j||^2 + lam sum w_j ||a_j||``;
    returns the fitted values.
    """
    n = len(y)
    yc = y - y.mean()
    alphas = [np.zeros(u.shape[1]) for u in bases]
    r = yc.copy()
    for _ in range(iters):
        biggest = 0.0
        for j, u in enumerate(bases):
            g = u.T @ r + alphas[j]
            norm = np.linalg.norm(g)
            thr = 0.5 * n * lam * weights[j]
            new = np.zeros_like(g) if norm <= thr else (1 - thr / norm) * g
            delta = new - alphas[j]
            if np.any(delta):
                r -= u @ delta
                alphas[j] = new
                biggest = max(biggest, np.abs(delta).max())
        if biggest < tol:
            break
    return y.mean() + yc - r


def prox_by_dual_projection(g, t1, t2, iters=100_000):
    """Proximal map of ``t1||.||_1 + t2||.||_2`` through its Moreau decomposition.

    ``prox(g) = g - proj_K(g)`` where ``K = t1 * box + t2 * ball`` is the
    subdifferential at zero. The projection onto the Minkowski sum is found by
    alternating exact minimization over the box and ball components.
    """
    g = np.asarray(g, dtype=float)
    b = np.zeros_like(g)
    a = np.zeros_like(g)
    for _ in range(iters):
        a_new = np.clip(g - b, -t1, t1)
        rest = g - a_new
        nrm = np.linalg.norm(rest)
        b_new = rest if nrm <= t2 else rest * (t2 / nrm)
        done = np.abs(a_new - a).max(initial=0) < 1e-16 and np.abs(b_new - b).max(initial=0) < 1e-16
        a, b = a_new, b_new
        if done:
            break
    return g - a - b


def type7_quantile(values, q):
    """Linear-interpolation quantile from a sorted copy."""
    xs = sorted(values)
    pos = (len(xs) - 1) * q
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])


def sgl_kkt_block(neg_grad, beta, a, b):
    """Subgradient distance for ``a||beta||_2 + b||beta||_1`` written out case by case."""
    out = np.empty_like(beta)
    norm = np.linalg.norm(beta)
    if norm == 0:
        soft = np.sign(neg_grad) * np.maximum(np.abs(neg_grad) - b, 0)
        return max(np.linalg.norm(soft) - a, 0.0)
    h = neg_grad - a * beta / norm
    for i, (hi, bi) in enumerate(zip(h, beta)):
        out[i] = hi - b * np.sign(bi) if bi != 0 else np.sign(hi) * max(abs(hi) - b, 0)
    return np.linalg.norm(out)
