"""
Exact solvers for the square linear assignment problem.

`hungarian_solve` is the shortest-augmenting-path form of the Hungarian
method with row and column potentials: each row is inserted in turn and the
potentials are shifted until an augmenting path of zero reduced cost exists.
It runs in O(n^3) with the inner column scan vectorised.

`solve` is the entry point the pairing and W2 code use. It dispatches to
`scipy.optimize.linear_sum_assignment` by default, or to `hungarian_solve`
when `AOT_ASSIGNMENT_SOLVER=hungarian`.
"""

import itertools
import math
from typing import Literal, Optional, Sequence, Union

import numpy as np
import structlog
from scipy.optimize import linear_sum_assignment

from aot.config import settings
from aot.errors import InvalidInputError
from aot.models.assignment import Assignment, CostMatrix

log = structlog.get_logger()

CostLike = Union[CostMatrix, np.ndarray, Sequence[Sequence[float]]]

# Permutations evaluated per vectorised chunk in the brute-force oracle
_BRUTE_FORCE_CHUNK = 40320


def _as_cost_matrix(cost: CostLike) -> CostMatrix:
    if isinstance(cost, CostMatrix):
        return cost
    return CostMatrix(costs=cost)


class AssignmentService:
    """Linear assignment: Hungarian solver, brute-force oracle, cost evaluation."""

    @staticmethod
    def assignment_cost(cost: CostLike, perm: Sequence[int]) -> float:
        """
        Evaluate sum_i costs[i, perm[i]].

        The sum is exactly rounded (`math.fsum`) so two permutations selecting
        the same multiset of entries always report the same total.
        """
        matrix = _as_cost_matrix(cost)
        p = np.asarray(perm)
        if p.ndim != 1 or p.shape[0] != matrix.n:
            raise InvalidInputError(
                f"permutation length {p.shape} does not match n={matrix.n}",
                field="perm",
            )
        if not np.issubdtype(p.dtype, np.integer):
            raise InvalidInputError("permutation must hold integers", field="perm")
        if not np.array_equal(np.sort(p), np.arange(matrix.n)):
            raise InvalidInputError("permutation is not a bijection", field="perm")
        return math.fsum(matrix.costs[np.arange(matrix.n), p].tolist())

    @staticmethod
    def solve(
        cost: CostLike,
        solver: Optional[Literal["scipy", "hungarian"]] = None,
    ) -> Assignment:
        """Exact minimum-cost assignment with the configured solver."""
        matrix = _as_cost_matrix(cost)
        solver = settings.ASSIGNMENT_SOLVER if solver is None else solver
        if solver == "hungarian":
            return AssignmentService.hungarian_solve(matrix)
        if solver != "scipy":
            raise InvalidInputError(f"unknown solver {solver!r}", field="solver")

        _, cols = linear_sum_assignment(matrix.costs)
        total = AssignmentService.assignment_cost(matrix, cols)
        return Assignment(permutation=cols, total_cost=total)

    @staticmethod
    def hungarian_solve(cost: CostLike) -> Assignment:
        """
        Solve min_pi sum_i costs[i, pi(i)] exactly.

        Ties are broken by the fixed scan order: the first column attaining
        the minimum slack is taken, so results are deterministic.
        """
        matrix = _as_cost_matrix(cost)
        perm = _shortest_augmenting_path(matrix.costs)
        total = AssignmentService.assignment_cost(matrix, perm)
        return Assignment(permutation=perm, total_cost=total)

    @staticmethod
    def brute_force_solve(cost: CostLike) -> Assignment:
        """
        Exhaustive minimum over all n! permutations (test oracle).

        Permutations are scanned in lexicographic order and the first minimum
        is kept.
        """
        matrix = _as_cost_matrix(cost)
        n = matrix.n
        if n > settings.BRUTE_FORCE_MAX_N:
            raise InvalidInputError(
                f"brute force refused for n={n} > {settings.BRUTE_FORCE_MAX_N}",
                field="cost",
            )

        rows = np.arange(n)
        best_perm = None
        best_cost = np.inf
        permutations = itertools.permutations(range(n))
        while True:
            chunk = list(itertools.islice(permutations, _BRUTE_FORCE_CHUNK))
            if not chunk:
                break
            perms = np.array(chunk, dtype=np.intp)
            totals = matrix.costs[rows, perms].sum(axis=1)
            k = int(np.argmin(totals))
            if totals[k] < best_cost:
                best_cost = float(totals[k])
                best_perm = perms[k]

        total = AssignmentService.assignment_cost(matrix, best_perm)
        return Assignment(permutation=best_perm, total_cost=total)


def _shortest_augmenting_path(costs: np.ndarray) -> np.ndarray:
    """Row -> column permutation minimising the total cost.

    Arrays are 1-based in the column dimension: column 0 is a virtual source
    that holds the row currently being inserted.
    """
    n = costs.shape[0]
    u = np.zeros(n + 1)  # row potentials
    v = np.zeros(n + 1)  # column potentials
    owner = np.zeros(n + 1, dtype=np.intp)  # owner[j] = row matched to column j
    way = np.zeros(n + 1, dtype=np.intp)  # predecessor column on the path

    for row in range(1, n + 1):
        owner[0] = row
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)

        while True:
            used[j0] = True
            i0 = owner[j0]
            free = np.flatnonzero(~used)
            reduced = costs[i0 - 1, free - 1] - u[i0] - v[free]
            better = reduced < minv[free]
            minv[free[better]] = reduced[better]
            way[free[better]] = j0

            k = int(np.argmin(minv[free]))
            j1 = int(free[k])
            delta = minv[j1]

            u[owner[used]] += delta
            v[used] -= delta
            minv[~used] -= delta

            j0 = j1
            if owner[j0] == 0:
                break

        # Flip the augmenting path back to the virtual source
        while j0 != 0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    perm = np.empty(n, dtype=np.intp)
    perm[owner[1:] - 1] = np.arange(n)
    return perm
