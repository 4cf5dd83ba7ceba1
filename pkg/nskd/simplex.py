"""
Simplex Module - Exact Rational Simplex Engine

This module provides the linear-programming engine behind solve_lp and the
locality test:
- Problems in the form  maximize c.x  subject to  A x <= r
- Exact Fraction arithmetic throughout, Bland's smallest-index rule
- Single-entry rows become variable bounds; a row and its exact negation
  become one ranged equality, so |x| <= P and equality families stay compact
- Sparse dictionary tableau with a column index
- Phase one with artificial variables when the starting point is infeasible
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import InfeasibleError, UnboundedError

logger = logging.getLogger(__name__)

SparseRow = Dict[int, Fraction]


@dataclass
class SimplexResult:
    """Optimal value, optimal point and pivot statistics."""
    value: Fraction
    x: List[Fraction]
    iterations: int
    pivots: int


def _normalize_rows(n_vars: int, rows: Sequence[SparseRow], rhs: Sequence[Fraction]):
    """
    Split the rows into variable bounds and (ranged) constraint rows.

    Returns lower and upper bound lists (None for infinite) and a list of
    (coefficients, r, width) meaning  r - width <= a.x <= r, width None for
    a one-sided row.
    """
    lower: List[Optional[Fraction]] = [None] * n_vars
    upper: List[Optional[Fraction]] = [None] * n_vars
    tightest: Dict[Tuple[Tuple[int, Fraction], ...], Fraction] = {}

    for row, r in zip(rows, rhs):
        coeffs = {j: Fraction(a) for j, a in row.items() if a != 0}
        r = Fraction(r)
        if not coeffs:
            if r < 0:
                raise InfeasibleError(f"empty row requires 0 <= {r}")
            continue
        if len(coeffs) == 1:
            (j, a), = coeffs.items()
            bound = r / a
            if a > 0:
                upper[j] = bound if upper[j] is None else min(upper[j], bound)
            else:
                lower[j] = bound if lower[j] is None else max(lower[j], bound)
            continue
        key = tuple(sorted(coeffs.items()))
        tightest[key] = r if key not in tightest else min(tightest[key], r)

    for j in range(n_vars):
        if lower[j] is not None and upper[j] is not None and lower[j] > upper[j]:
            raise InfeasibleError(f"variable {j} has bounds [{lower[j]}, {upper[j]}]")

    constraints = []
    used = set()
    for key, r in tightest.items():
        if key in used:
            continue
        negated = tuple((j, -a) for j, a in key)
        used.add(key)
        if negated in tightest and negated not in used:
            used.add(negated)
            width = r + tightest[negated]
            if width < 0:
                raise InfeasibleError(f"row over {len(key)} variables has an empty range")
            constraints.append((dict(key), r, width))
        else:
            constraints.append((dict(key), r, None))
    return lower, upper, constraints


class SimplexTableau:
    """
    Bounded-variable primal simplex over exact rationals.

    Every constraint a.x <= r (or its ranged form) gets a slack s with
    a.x + s = r and 0 <= s <= width. Each tableau row stores the equation
    x_B + sum_k T[k] x_k = const for its basic variable x_B; values of all
    variables are tracked explicitly, nonbasic ones sitting at a bound
    (or at 0 when free).
    """

    def __init__(self, n_vars: int, rows: Sequence[SparseRow], rhs: Sequence[Fraction],
                 objective: SparseRow):
        self.n_structural = n_vars
        self.objective = {j: Fraction(c) for j, c in objective.items() if c != 0}
        lower, upper, constraints = _normalize_rows(n_vars, rows, rhs)
        self.lower = list(lower)
        self.upper = list(upper)
        self.value: List[Fraction] = []
        for j in range(n_vars):
            if lower[j] is not None:
                self.value.append(lower[j])
            elif upper[j] is not None:
                self.value.append(upper[j])
            else:
                self.value.append(Fraction(0))

        self.basis: List[int] = []
        self.tableau: List[SparseRow] = []
        self.cols: Dict[int, set] = {}
        self.artificials: List[int] = []
        self.iterations = 0
        self.pivots = 0
        self._build(constraints)

    # ------------------------------------------------------------------
    def _new_variable(self, lower, upper, value) -> int:
        self.lower.append(lower)
        self.upper.append(upper)
        self.value.append(value)
        return len(self.value) - 1

    def _set_row(self, i: int, coeffs: SparseRow) -> None:
        for k in coeffs:
            self.cols.setdefault(k, set()).add(i)
        self.tableau[i] = coeffs

    def _build(self, constraints) -> None:
        pending = []
        for coeffs, r, width in constraints:
            activity = sum(a * self.value[j] for j, a in coeffs.items())
            slack_value = r - activity
            slack = self._new_variable(Fraction(0), width, slack_value)
            if slack_value >= 0 and (width is None or slack_value <= width):
                self.tableau.append({})
                self.basis.append(slack)
                self._set_row(len(self.basis) - 1, dict(coeffs))
            else:
                pending.append((coeffs, slack, slack_value, width))

        for coeffs, slack, slack_value, width in pending:
            bound = Fraction(0) if slack_value < 0 else width
            sigma = 1 if slack_value > bound else -1
            self.value[slack] = bound
            artificial = self._new_variable(Fraction(0), None, abs(slack_value - bound))
            self.artificials.append(artificial)
            row = {j: a / sigma for j, a in coeffs.items()}
            row[slack] = Fraction(1, sigma)
            self.tableau.append({})
            self.basis.append(artificial)
            self._set_row(len(self.basis) - 1, row)
        logger.debug("Tableau: %d rows, %d variables, %d artificials",
                     len(self.basis), len(self.value), len(self.artificials))

    # ------------------------------------------------------------------
    def _reduced_costs(self, costs: SparseRow) -> SparseRow:
        basic = set(self.basis)
        reduced = {j: c for j, c in costs.items() if j not in basic}
        for i, b in enumerate(self.basis):
            cb = costs.get(b)
            if not cb:
                continue
            for k, t in self.tableau[i].items():
                reduced[k] = reduced.get(k, 0) - cb * t
        return {k: d for k, d in reduced.items() if d != 0}

    def _is_fixed(self, j: int) -> bool:
        return self.lower[j] is not None and self.lower[j] == self.upper[j]

    def _entering(self, reduced: SparseRow) -> Optional[Tuple[int, int]]:
        for j in sorted(reduced):
            d = reduced[j]
            if self._is_fixed(j):
                continue
            if d > 0 and (self.upper[j] is None or self.value[j] < self.upper[j]):
                return j, 1
            if d < 0 and (self.lower[j] is None or self.value[j] > self.lower[j]):
                return j, -1
        return None

    def _ratio_test(self, j: int, direction: int) -> Tuple[Optional[Fraction], Optional[int]]:
        best, leaving_row = None, None
        for i in self.cols.get(j, ()):
            rate = -self.tableau[i][j] * direction
            b = self.basis[i]
            if rate < 0 and self.lower[b] is not None:
                step = (self.value[b] - self.lower[b]) / -rate
            elif rate > 0 and self.upper[b] is not None:
                step = (self.upper[b] - self.value[b]) / rate
            else:
                continue
            if best is None or step < best or (step == best and b < self.basis[leaving_row]):
                best, leaving_row = step, i
        return best, leaving_row

    def _pivot(self, r: int, j: int, reduced: SparseRow) -> None:
        row = self.tableau[r]
        old_basic = self.basis[r]
        pivot = row[j]
        new_row = {k: t / pivot for k, t in row.items() if k != j}
        new_row[old_basic] = 1 / pivot

        for k in row:
            self.cols[k].discard(r)
        for i in list(self.cols.get(j, ())):
            factor = self.tableau[i][j]
            target = self.tableau[i]
            del target[j]
            self.cols[j].discard(i)
            for k, t in new_row.items():
                updated = target.get(k, 0) - factor * t
                if updated == 0:
                    if k in target:
                        del target[k]
                        self.cols[k].discard(i)
                else:
                    target[k] = updated
                    self.cols.setdefault(k, set()).add(i)
        self.basis[r] = j
        self.tableau[r] = {}
        self._set_row(r, new_row)

        d = reduced.pop(j, 0)
        if d:
            for k, t in new_row.items():
                updated = reduced.get(k, 0) - d * t
                if updated == 0:
                    reduced.pop(k, None)
                else:
                    reduced[k] = updated
        self.pivots += 1

    def _optimize(self, costs: SparseRow, phase: str) -> None:
        reduced = self._reduced_costs(costs)
        while True:
            choice = self._entering(reduced)
            if choice is None:
                return
            j, direction = choice
            self.iterations += 1
            step, r = self._ratio_test(j, direction)
            span = None
            if self.lower[j] is not None and self.upper[j] is not None:
                span = self.upper[j] - self.lower[j]
            if step is None and span is None:
                raise UnboundedError(f"objective unbounded along variable {j}")

            if r is None or (span is not None and span < step):
                step = span
                r = None
            self.value[j] += direction * step
            for i in self.cols.get(j, ()):
                self.value[self.basis[i]] -= self.tableau[i][j] * direction * step
            if r is not None:
                leaving = self.basis[r]
                # land exactly on the bound that blocked the step
                rate = -self.tableau[r][j] * direction
                self.value[leaving] = self.lower[leaving] if rate < 0 else self.upper[leaving]
                self._pivot(r, j, reduced)
            if self.iterations % 500 == 0:
                logger.debug("%s: %d iterations, %d pivots", phase, self.iterations, self.pivots)

    # ------------------------------------------------------------------
    def solve(self) -> SimplexResult:
        if self.artificials:
            self._optimize({a: Fraction(-1) for a in self.artificials}, "phase 1")
            infeasibility = sum(self.value[a] for a in self.artificials)
            if infeasibility > 0:
                raise InfeasibleError(f"no feasible point (phase one ends at {infeasibility})")
            for a in self.artificials:
                self.upper[a] = Fraction(0)
        self._optimize(self.objective, "phase 2")
        x = self.value[:self.n_structural]
        value = sum((c * x[j] for j, c in self.objective.items()), Fraction(0))
        logger.debug("Optimum %s after %d iterations", value, self.iterations)
        return SimplexResult(value=value, x=list(x), iterations=self.iterations, pivots=self.pivots)


def solve_bounded(n_vars: int, rows: Sequence[SparseRow], rhs: Sequence[Fraction],
                  objective: SparseRow) -> SimplexResult:
    """
    Maximize objective.x subject to rows[i].x <= rhs[i], exactly.

    Args:
        n_vars (int): Number of structural variables
        rows: Sparse coefficient dictionaries
        rhs: Right-hand sides
        objective: Sparse objective coefficients

    Returns:
        SimplexResult: exact optimum and an optimal point

    Raises:
        InfeasibleError, UnboundedError

    Example:
        # maximize 3x + 5y with x <= 4, 2y <= 12, 3x + 2y <= 18, x, y >= 0
        rows = [{0: 1}, {1: 2}, {0: 3, 1: 2}, {0: -1}, {1: -1}]
        solve_bounded(2, rows, [4, 12, 18, 0, 0], {0: 3, 1: 5}).value   # 36
    """
    return SimplexTableau(n_vars, rows, rhs, objective).solve()
