"""Categorical variables, indicator/coded design matrices and interactions.

Levels are stored as dense 1-based integer indices. The helpers here build
raw (uncentered, unscaled) matrices; centering and scaling live in
:mod:`catlasso.standardize`.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

SCHEMES = ("reference", "effect", "helmert")


class DesignError(ValueError):
    """Raised for invalid categorical data or incompatible matrices."""


class ConstraintError(ValueError):
    """Raised when a coefficient vector violates its identifiability constraint."""


@dataclass(frozen=True)
class CategoricalVariable:
    """Observations of one categorical variable.

    Attributes:
        codes: Level index of every observation, values in ``1..num_levels``.
        num_levels: Number of levels ``L``.
        name: Column name used in labels and output.
        labels: Original label of each level (``labels[l - 1]`` for level ``l``).
    """

    codes: np.ndarray
    num_levels: int
    name: str = "x"
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1 or codes.size == 0:
            raise DesignError(f"{self.name}: need a non-empty 1-d vector of level indices")
        if not np.issubdtype(codes.dtype, np.integer):
            if not np.all(np.equal(np.mod(codes, 1), 0)):
                raise DesignError(f"{self.name}: level indices must be integers")
            codes = codes.astype(np.int64)
        if self.num_levels < 1:
            raise DesignError(f"{self.name}: num_levels must be positive")
        if codes.min() < 1 or codes.max() > self.num_levels:
            raise DesignError(
                f"{self.name}: level indices must lie in [1, {self.num_levels}]"
            )
        codes = codes.astype(np.int64, copy=True)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        if not self.labels:
            labels = tuple(str(l) for l in range(1, self.num_levels + 1))
            object.__setattr__(self, "labels", labels)
        elif len(self.labels) != self.num_levels:
            raise DesignError(f"{self.name}: expected {self.num_levels} labels")

    @property
    def n(self) -> int:
        return int(self.codes.size)

    def counts(self) -> np.ndarray:
        """Level frequencies ``n_1, ..., n_L``."""
        return np.bincount(self.codes - 1, minlength=self.num_levels)

    @classmethod
    def from_values(cls, values: Sequence, name: str = "x") -> CategoricalVariable:
        """Map raw column values to level indices.

        Integer-valued columns are taken as level indices directly, so
        ``L = max(values)`` and unobserved levels are kept. Any other column
        is treated as string labels, sorted, and numbered from 1.
        """
        vals = list(values)
        if not vals:
            raise DesignError(f"{name}: empty column")
        try:
            ints = [int(v) for v in vals]
            if any(str(v).strip() != str(i) for v, i in zip(vals, ints)):
                raise ValueError
        except (TypeError, ValueError):
            labels = tuple(sorted({str(v) for v in vals}))
            index = {lab: i + 1 for i, lab in enumerate(labels)}
            codes = np.array([index[str(v)] for v in vals], dtype=np.int64)
            return cls(codes, len(labels), name=name, labels=labels)
        if min(ints) < 1:
            raise DesignError(f"{name}: integer levels must be >= 1")
        return cls(np.array(ints, dtype=np.int64), max(ints), name=name)


def indicator_matrix(var: CategoricalVariable) -> np.ndarray:
    """Dummy matrix with ``X[i, l - 1] = 1`` iff observation ``i`` has level ``l``."""
    x = np.zeros((var.n, var.num_levels))
    x[np.arange(var.n), var.codes - 1] = 1.0
    return x


def contrast_rows(num_levels: int, scheme: str) -> np.ndarray:
    """Row representation of each level under a coding scheme.

    Returns an ``L x (L - 1)`` matrix whose ``l``-th row is the coded
    representation of level ``l``. Reference coding uses level ``L`` as the
    reference category.
    """
    L = num_levels
    if L < 2:
        raise DesignError(f"coding needs at least 2 levels, got {L}")
    if scheme == "reference":
        return np.vstack([np.eye(L - 1), np.zeros((1, L - 1))])
    if scheme == "effect":
        return np.vstack([np.eye(L - 1), -np.ones((1, L - 1))])
    if scheme == "helmert":
        rows = np.zeros((L, L - 1))
        for c in range(1, L + 1):
            rows[c - 1, c - 1 :] = -1.0
            if c >= 2:
                rows[c - 1, c - 2] = c - 1
        return rows
    raise DesignError(f"unknown coding scheme {scheme!r}; expected one of {SCHEMES}")


def code_matrix(var: CategoricalVariable, scheme: str) -> np.ndarray:
    """Coded design matrix ``Z`` (``n x (L - 1)``) for ``scheme``."""
    return contrast_rows(var.num_levels, scheme)[var.codes - 1]


def interaction_indicators(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Column-wise products of two indicator matrices.

    Column ``(l - 1) * M + (m - 1)`` holds ``x1[:, l - 1] * x2[:, m - 1]``,
    i.e. ordering ``(1,1), (1,2), ..., (1,M), (2,1), ..., (L,M)``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.ndim != 2 or x2.ndim != 2 or x1.shape[0] != x2.shape[0]:
        raise DesignError(
            f"interaction needs matrices with equal row counts, got {x1.shape} and {x2.shape}"
        )
    n = x1.shape[0]
    return (x1[:, :, None] * x2[:, None, :]).reshape(n, -1)


@dataclass(frozen=True)
class CrossTab:
    """Cell frequencies ``n_lm`` of two categorical variables."""

    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def empty_cells(self) -> list[tuple[int, int]]:
        """1-based ``(l, m)`` pairs with zero observations."""
        return [(int(l) + 1, int(m) + 1) for l, m in np.argwhere(self.counts == 0)]


def crosstab(v1: CategoricalVariable, v2: CategoricalVariable) -> CrossTab:
    if v1.n != v2.n:
        raise DesignError(f"cross-tabulation needs equal lengths, got {v1.n} and {v2.n}")
    counts = np.zeros((v1.num_levels, v2.num_levels), dtype=np.int64)
    np.add.at(counts, (v1.codes - 1, v2.codes - 1), 1)
    return CrossTab(counts)


def reference_from_sum_zero(
    beta0: float, beta: np.ndarray, atol: float = 1e-10
) -> tuple[float, np.ndarray]:
    """Convert sum-to-zero coefficients to reference coding (level ``L`` as reference).

    Returns ``(gamma0, gamma)`` with ``gamma_l = beta_l - beta_L`` and
    ``gamma0 = beta0 + beta_L``.
    """
    beta = np.asarray(beta, dtype=float)
    scale = max(1.0, float(np.abs(beta).max(initial=0.0)))
    if abs(beta.sum()) > atol * scale:
        raise ConstraintError(f"coefficients sum to {beta.sum():.3g}, expected 0")
    return float(beta0 + beta[-1]), beta[:-1] - beta[-1]


@dataclass(frozen=True)
class GroupedDesign:
    """Ordered predictor blocks sharing one set of observations.

    Every block exposes ``label``, ``kind`` (``"main"`` or ``"interaction"``),
    ``df``, ``standardized``, ``matrix`` (dense ``n x k`` centered columns) and
    ``theta(beta)`` for the sum-to-zero back-transform.
    """

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise DesignError("design needs at least one block")
        ns = {b.matrix.shape[0] for b in self.blocks}
        if len(ns) != 1:
            raise DesignError(f"blocks disagree on the number of rows: {sorted(ns)}")

    @property
    def n(self) -> int:
        return self.blocks[0].matrix.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [b.matrix.shape[1] for b in self.blocks]

    @property
    def slices(self) -> list[slice]:
        edges = np.cumsum([0] + self.sizes)
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    @property
    def df(self) -> np.ndarray:
        return np.array([b.df for b in self.blocks], dtype=float)

    def dense(self) -> np.ndarray:
        return np.hstack([b.matrix for b in self.blocks])

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)
