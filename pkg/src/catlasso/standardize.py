"""Centering and column scaling of categorical blocks.

A main-effect block represents ``Pi X S^{-1}``, where ``Pi`` subtracts column
means and ``S = diag(sqrt(n_1), ..., sqrt(n_L))``. Interaction blocks
represent ``P X12 S12^{-1}`` with ``P`` projecting onto the orthogonal
complement of ``range([1 X1 X2])``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .design import (
    CategoricalVariable,
    DesignError,
    GroupedDesign,
    crosstab,
    indicator_matrix,
    interaction_indicators,
)

RANK_RTOL = 1e-10


class EmptyLevelError(DesignError):
    """A level (or interaction cell) has no observations."""


def orthonormal_basis(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of ``range(a)`` from a column-pivoted QR.

    Columns whose pivot falls below ``rtol`` times the largest column norm
    are treated as linearly dependent and dropped.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    q, r, _ = linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    rank = int(np.sum(diag > rtol * diag[0]))
    return q[:, :rank]


def penalty_norm(counts, beta) -> float:
    """Norm of the centered fit ``||Pi X beta||_2`` from level frequencies alone.

    Evaluates ``(sum_l n_l beta_l^2 - n (beta' xbar)^2)^{1/2}`` with
    ``xbar = counts / n``.
    """
    counts = np.asarray(counts, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if counts.shape != beta.shape:
        raise ValueError(f"counts {counts.shape} and beta {beta.shape} differ in shape")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    n = counts.sum()
    if n == 0:
        return 0.0
    radicand = float(np.dot(counts, beta**2) - np.dot(counts, beta) ** 2 / n)
    if radicand < 0:
        if radicand < -1e-12 * max(1.0, float(np.dot(counts, beta**2))):
            raise FloatingPointError(f"negative radicand {radicand:.3g} in penalty norm")
        radicand = 0.0
    return float(np.sqrt(radicand))


def theta_from_beta(beta_hat, s) -> np.ndarray:
    """Back-transform scaled coefficients to sum-to-zero coefficients.

    ``theta = S^{-1} beta - mean(S^{-1} beta)``; the centered fit is unchanged.
    """
    scaled = np.asarray(beta_hat, dtype=float) / np.asarray(s, dtype=float)
    return scaled - scaled.mean()


@dataclass(frozen=True, eq=False)
class IndicatorBlock:
    """Centered indicator columns of one variable, optionally scaled by ``sqrt(n_l)``.

    The centering projector is never formed; ``matvec``/``rmatvec`` subtract
    the stored column means on the fly. ``matrix`` is the dense ``n x L``
    version used by the solvers.
    """

    x: np.ndarray
    scale: np.ndarray
    label: str = "x"
    standardized: bool = True
    kind: str = "main"
    means: np.ndarray = field(init=False, repr=False)
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.x.shape[0]
        means = self.x.sum(axis=0) / n / self.scale
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "matrix", self.x / self.scale - means)

    @property
    def counts(self) -> np.ndarray:
        return self.x.sum(axis=0)

    @property
    def num_levels(self) -> int:
        return self.x.shape[1]

    @property
    def df(self) -> float:
        return float(self.num_levels - 1)

    @property
    def null_vector(self) -> np.ndarray:
        """Spans the null space of the block: ``s`` when scaled, ``1`` otherwise."""
        return self.scale.copy()

    def matvec(self, v) -> np.ndarray:
        return self.x @ (np.asarray(v) / self.scale) - float(self.means @ v)

    def rmatvec(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (self.x.T @ r) / self.scale - self.means * r.sum()

    def gram(self) -> np.ndarray:
        """``B'B`` from the level counts; ``I - s s'/n`` for a scaled block."""
        counts = self.counts
        n = counts.sum()
        return (np.diag(counts) - np.outer(counts, counts) / n) / np.outer(
            self.scale, self.scale
        )

    def theta(self, beta) -> np.ndarray:
        return theta_from_beta(beta, self.scale)

    def predict(self, codes, theta) -> np.ndarray:
        """Contribution of sum-to-zero coefficients to new observations.

        Centering uses the means of the data the block was built from, so on
        that data this equals ``matvec(S theta)``.
        """
        theta = np.asarray(theta, dtype=float)
        xbar = self.counts / self.counts.sum()
        return theta[np.asarray(codes) - 1] - float(xbar @ theta)


ScaledBlock = IndicatorBlock


def _check_levels(x: np.ndarray, label: str) -> np.ndarray:
    counts = x.sum(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        levels = ", ".join(str(int(l) + 1) for l in empty)
        raise EmptyLevelError(f"{label}: level(s) {levels} have no observations")
    return counts


def scaled_block(x, label: str = "x") -> IndicatorBlock:
    """Standardized block ``Pi X S^{-1}`` from an indicator matrix."""
    x = np.asarray(x, dtype=float)
    counts = _check_levels(x, label)
    return IndicatorBlock(x, np.sqrt(counts), label=label, standardized=True)


def centered_block(x, label: str = "x") -> IndicatorBlock:
    """Centering-only block ``Pi X``."""
    x = np.asarray(x, dtype=float)
    _check_levels(x, label)
    return IndicatorBlock(x, np.ones(x.shape[1]), label=label, standardized=False)


@dataclass(frozen=True, eq=False)
class CodedBlock:
    """Centered coded columns ``Pi Z``; coefficients are reported as is."""

    z: np.ndarray
    label: str = "z"
    standardized: bool = False
    kind: str = "main"
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", self.z - self.z.mean(axis=0))

    @property
    def df(self) -> float:
        return float(self.z.shape[1])

    def theta(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float).copy()


def coded_block(z, label: str = "z") -> CodedBlock:
    return CodedBlock(np.asarray(z, dtype=float), label=label)


@dataclass(frozen=True, eq=False)
class InteractionStandardizer:
    """Projectors and scalings for one pair of interacting variables.

    Attributes:
        main_basis: Orthonormal basis of ``range([1 X1 X2])``; ``P`` projects
            onto its complement.
        cell_scale: ``sqrt(n_lm)`` in ``(l, m)`` row-major order.
        scale1, scale2: ``sqrt`` of the marginal frequencies.
        null_sets: ``LM x (L + M)`` matrix whose columns are the indicator
            sums over rows (first ``L``) and over columns (last ``M``).
        null_basis: Orthonormal basis of ``range(null_sets)``.
    """

    main_basis: np.ndarray
    cell_scale: np.ndarray
    scale1: np.ndarray
    scale2: np.ndarray
    null_sets: np.ndarray
    null_basis: np.ndarray
    shape: tuple[int, int]

    def project_out(self, w: np.ndarray) -> np.ndarray:
        """Apply ``P``: remove the component in ``range([1 X1 X2])``."""
        q = self.main_basis
        return w - q @ (q.T @ w)

    def project_null(self, v: np.ndarray) -> np.ndarray:
        """Apply ``P_N``: remove the component in ``range(null_sets)``."""
        q = self.null_basis
        return v - q @ (q.T @ v)


def interaction_null_sets(L: int, M: int) -> np.ndarray:
    rows = np.kron(np.eye(L), np.ones((M, 1)))
    cols = np.kron(np.ones((L, 1)), np.eye(M))
    return np.hstack([rows, cols])


def interaction_standardizer(x1, x2) -> InteractionStandardizer:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape[0] != x2.shape[0]:
        raise DesignError(f"row counts differ: {x1.shape[0]} and {x2.shape[0]}")
    counts = x1.T @ x2
    empty = np.argwhere(counts == 0)
    if empty.size:
        cells = ", ".join(f"({l + 1}, {m + 1})" for l, m in empty)
        raise EmptyLevelError(f"interaction cell(s) {cells} have no observations")
    L, M = counts.shape
    sets = interaction_null_sets(L, M)
    return InteractionStandardizer(
        main_basis=orthonormal_basis(np.hstack([x1, x2])),
        cell_scale=np.sqrt(counts.ravel()),
        scale1=np.sqrt(counts.sum(axis=1)),
        scale2=np.sqrt(counts.sum(axis=0)),
        null_sets=sets,
        null_basis=orthonormal_basis(sets),
        shape=(L, M),
    )


def standardized_interaction_block(std: InteractionStandardizer, x12) -> np.ndarray:
    """Dense ``P X12 S12^{-1}``."""
    x12 = np.asarray(x12, dtype=float)
    if x12.shape[1] != std.cell_scale.size:
        raise DesignError(
            f"interaction matrix has {x12.shape[1]} columns, expected {std.cell_scale.size}"
        )
    return std.project_out(x12 / std.cell_scale)


def theta_interaction(beta12, std: InteractionStandardizer) -> np.ndarray:
    """``P_N S12^{-1} beta12``: interaction coefficients with zero row and column sums."""
    return std.project_null(np.asarray(beta12, dtype=float) / std.cell_scale)


@dataclass(frozen=True, eq=False)
class InteractionBlock:
    standardizer: InteractionStandardizer
    matrix: np.ndarray
    label: str = "x1:x2"
    standardized: bool = True
    kind: str = "interaction"

    @property
    def df(self) -> float:
        L, M = self.standardizer.shape
        return float(L * M - L - M + 1)

    @property
    def null_vectors(self) -> np.ndarray:
        """Columns spanning the block's null space, ``S12 N``."""
        std = self.standardizer
        return std.cell_scale[:, None] * std.null_sets

    def gram(self) -> np.ndarray:
        return self.matrix.T @ self.matrix

    def theta(self, beta) -> np.ndarray:
        return theta_interaction(beta, self.standardizer)


def interaction_block(v1: CategoricalVariable, v2: CategoricalVariable) -> InteractionBlock:
    x1, x2 = indicator_matrix(v1), indicator_matrix(v2)
    std = interaction_standardizer(x1, x2)
    x12 = interaction_indicators(x1, x2)
    return InteractionBlock(
        std, standardized_interaction_block(std, x12), label=f"{v1.name}:{v2.name}"
    )


def build_design(
    variables: Sequence[CategoricalVariable],
    standardized: bool = True,
    interaction: tuple[int, int] | None = None,
) -> GroupedDesign:
    """One main-effect block per variable, plus an optional interaction block.

    ``standardized=False`` gives centering-only blocks. The interaction pair
    is given as 0-based positions into ``variables`` and is always
    standardized.
    """
    for v in variables:
        if v.num_levels < 2:
            raise DesignError(f"{v.name}: modeling needs at least 2 levels, got {v.num_levels}")
    make = scaled_block if standardized else centered_block
    blocks = [make(indicator_matrix(v), label=v.name) for v in variables]
    if interaction is not None:
        i, j = interaction
        if i == j:
            raise DesignError("an interaction needs two distinct variables")
        v1, v2 = variables[i], variables[j]
        # Validate cells before building anything large.
        ct = crosstab(v1, v2)
        if ct.empty_cells():
            cells = ", ".join(f"({l}, {m})" for l, m in ct.empty_cells())
            raise EmptyLevelError(
                f"{v1.name}:{v2.name}: interaction cell(s) {cells} have no observations"
            )
        blocks.append(interaction_block(v1, v2))
    return GroupedDesign(tuple(blocks))
