"""Per-aspect influence propagation over the citation graph.

Each aspect's influence mass is a probability distribution over nodes,
evolved by a column-stochastic operator

    P_k = beta * ones(N, N) + nu * (X_k + Z_k),   beta = 0.05 / N,  nu = 1 - beta * N

where X_k column-normalizes the learned per-aspect edge impacts (mass flows
from a cited node to its citers) and Z_k spreads the mass of dangling columns
uniformly. nu = 1 - beta*N is the unique choice that keeps every column of
P_k summing to 1. The operator is applied without ever materializing the
dense matrix: the all-ones term is a rank-one update and Z_k a scalar
correction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

__all__ = [
    "AspectState",
    "TransitionTensor",
    "ProjectionOperator",
    "initialize_state",
    "build_transition",
    "build_projection",
    "apply_projection",
    "propagate",
    "save_state",
    "load_state",
]

DEFAULT_EPSILON = 1e-8
DEFAULT_MAX_STEPS = 100


@dataclass(frozen=True)
class AspectState:
    """Per-node, per-aspect influence mass; every column is a distribution."""

    matrix: np.ndarray = field(repr=False)
    step: int = 0
    residual: float = float("inf")
    converged: bool = True

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def aspects(self) -> int:
        return self.matrix.shape[1]

    def row(self, j: int) -> np.ndarray:
        return self.matrix[j]

    def validate(self, tolerance: float = 1e-9) -> None:
        if np.any(self.matrix < 0) or np.any(self.matrix > 1):
            raise ValueError("aspect state entries must lie in [0, 1]")
        sums = self.matrix.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > tolerance):
            raise ValueError(f"aspect state columns must sum to 1, got {sums}")


def initialize_state(num_nodes: int, aspects: int) -> AspectState:
    """Uniform 1/N mass per node in every aspect column."""
    if num_nodes < 1 or aspects < 1:
        raise ValueError("need at least one node and one aspect")
    return AspectState(matrix=np.full((num_nodes, aspects), 1.0 / num_nodes))


@dataclass(frozen=True)
class TransitionTensor:
    """Per-aspect sparse transition matrices with column-wise normalization.

    matrices[k][i, j] is the share of cited node j's aspect-k influence
    flowing to citer i. Columns with no positive impact (including every
    never-cited node) are all-zero and recorded in dangling_mask.
    """

    matrices: tuple
    dangling_mask: np.ndarray = field(repr=False)  # (N, I) bool: column j is dangling for aspect k
    num_nodes: int
    aspects: int


def build_transition(edges, impacts: np.ndarray, num_nodes: int) -> TransitionTensor:
    """Column-normalize per-edge impact vectors into per-aspect matrices.

    edges: sequence of (citer i, cited j) pairs; impacts: (M, I) array of the
    nonnegative masked impacts, rows aligned with edges.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    impacts = np.atleast_2d(np.asarray(impacts, dtype=np.float64))
    if impacts.shape[0] != len(edges):
        raise ValueError(f"{len(edges)} edges but {impacts.shape[0]} impact rows")
    if np.any(impacts < 0):
        raise ValueError("edge impacts must be nonnegative")

    aspects = impacts.shape[1]
    rows, cols = edges[:, 0], edges[:, 1]
    matrices = []
    dangling = np.ones((num_nodes, aspects), dtype=bool)
    for k in range(aspects):
        weight = impacts[:, k]
        column_mass = np.bincount(cols, weights=weight, minlength=num_nodes)
        fed = column_mass > 0.0
        dangling[:, k] = ~fed
        keep = fed[cols] & (weight > 0.0)
        data = weight[keep] / column_mass[cols[keep]]
        mat = sparse.csr_matrix(
            (data, (rows[keep], cols[keep])), shape=(num_nodes, num_nodes)
        )
        matrices.append(mat)
    return TransitionTensor(
        matrices=tuple(matrices), dangling_mask=dangling, num_nodes=num_nodes, aspects=aspects
    )


@dataclass(frozen=True)
class ProjectionOperator:
    """The implicit column-stochastic propagation operator, one per aspect."""

    tensor: TransitionTensor
    beta: float
    nu: float

    @property
    def num_nodes(self) -> int:
        return self.tensor.num_nodes

    @property
    def aspects(self) -> int:
        return self.tensor.aspects


def build_projection(tensor: TransitionTensor) -> ProjectionOperator:
    beta = 0.05 / tensor.num_nodes
    nu = 1.0 - beta * tensor.num_nodes
    return ProjectionOperator(tensor=tensor, beta=beta, nu=nu)


def apply_projection(op: ProjectionOperator, state: AspectState) -> AspectState:
    """One propagation step; column distributions stay column distributions."""
    matrix = state.matrix
    if matrix.shape != (op.num_nodes, op.aspects):
        raise ValueError(f"state shape {matrix.shape} does not match operator ({op.num_nodes}, {op.aspects})")
    column_sums = matrix.sum(axis=0)
    if np.any(np.abs(column_sums - 1.0) > 1e-6):
        raise ValueError(f"input state columns must sum to 1 (got {column_sums})")

    n = op.num_nodes
    out = np.empty_like(matrix)
    for k in range(op.aspects):
        column = matrix[:, k]
        dangling_mass = column[op.tensor.dangling_mask[:, k]].sum()
        out[:, k] = op.beta * column_sums[k] + op.nu * (
            op.tensor.matrices[k] @ column + dangling_mass / n
        )
    return AspectState(matrix=out, step=state.step + 1, residual=state.residual, converged=state.converged)


def propagate(
    op: ProjectionOperator,
    initial: AspectState,
    max_steps: int = DEFAULT_MAX_STEPS,
    epsilon: float = DEFAULT_EPSILON,
) -> AspectState:
    """Power-iterate to the stationary per-aspect distributions.

    Stops when the max per-aspect L1 change drops below epsilon; if max_steps
    is exhausted first, the last iterate comes back flagged unconverged.
    The fixed point is unique (the operator is strictly positive entrywise),
    so the result does not depend on the starting state beyond epsilon.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if max_steps == 0:
        return replace(initial, residual=float("inf"), converged=False)

    current = initial
    residual = float("inf")
    for _ in range(max_steps):
        nxt = apply_projection(op, current)
        residual = float(np.max(np.abs(nxt.matrix - current.matrix).sum(axis=0)))
        current = nxt
        if residual < epsilon:
            return replace(current, residual=residual, converged=True)
    return replace(current, residual=residual, converged=False)


def save_state(state: AspectState, path) -> None:
    payload = {
        "num_nodes": state.num_nodes,
        "aspects": state.aspects,
        "step": state.step,
        "residual": state.residual if np.isfinite(state.residual) else None,
        "converged": state.converged,
        "matrix": state.matrix.ravel().tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_state(path) -> AspectState:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        matrix = np.asarray(payload["matrix"], dtype=np.float64).reshape(
            payload["num_nodes"], payload["aspects"]
        )
        residual = payload["residual"]
        return AspectState(
            matrix=matrix,
            step=int(payload["step"]),
            residual=float("inf") if residual is None else float(residual),
            converged=bool(payload["converged"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state file {path}: {exc}") from exc
