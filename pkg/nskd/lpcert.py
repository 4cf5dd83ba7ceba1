"""
LP Certificate Module - XOR Privacy Amplification as a Linear Program

This module provides:
- The primal program whose optimum is twice the best non-signaling distance
  of the parity of Alice's bits (variables Delta in the canonical layout)
- Exact solution by the rational simplex engine
- The hand-derived single-box dual vectors, their tensor powers, and exact
  verification of dual feasibility (weak duality)
- Closed-form certified bounds for products and mixtures of boxes
- Conversion between primal points Delta and partition elements
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .boxcore import (ConditionalBox, CanonicalLayout, canonical_index, depolarize,
                      require_nonsignaling, satisfies_chsh, violation_mass)
from .errors import DimensionError, DomainError, PreconditionError
from .rationals import Number, format_rational, to_exact
from .simplex import solve_bounded

logger = logging.getLogger(__name__)

SparseRow = Dict[int, Fraction]


@dataclass(frozen=True)
class LinearProgram:
    """
    maximize objective . Delta  subject to  rows . Delta <= rhs.

    Attributes:
        n_vars (int): Variable count (16 ** n_pairs)
        rows (tuple): Sparse rational coefficient rows
        rhs (tuple): Right-hand side, one entry per row
        objective (dict): Sparse objective b
    """
    n_vars: int
    rows: Tuple[SparseRow, ...]
    rhs: Tuple[Fraction, ...]
    objective: SparseRow

    def __post_init__(self):
        if len(self.rows) != len(self.rhs):
            raise DimensionError(f"{len(self.rows)} rows but {len(self.rhs)} right-hand sides")
        for i, row in enumerate(self.rows):
            if any(not 0 <= j < self.n_vars for j in row):
                raise DimensionError(f"row {i} references a variable outside 0..{self.n_vars - 1}")
        if any(not 0 <= j < self.n_vars for j in self.objective):
            raise DimensionError("objective references a variable outside the program")

    @property
    def n_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class DualCertificate:
    """
    Nonnegative multipliers, one per primal row, and the bound they prove.

    A factored certificate leaves lam empty and keeps one single-box
    vector per factor in factors; its full vector is their Kronecker
    product, which is never built.
    """
    lam: Tuple[Fraction, ...]
    claimed_bound: Fraction
    factors: Tuple[Tuple[Fraction, ...], ...] = ()

    @property
    def factored(self) -> bool:
        return bool(self.factors)

    def to_dict(self) -> Dict:
        if self.factored:
            return {'factors': [[format_rational(x) for x in lam] for lam in self.factors],
                    'claimed_bound': format_rational(self.claimed_bound)}
        return {'lambda': [format_rational(x) for x in self.lam],
                'claimed_bound': format_rational(self.claimed_bound)}


# ----------------------------------------------------------------------
# Primal construction
# ----------------------------------------------------------------------

def nonsignaling_rows(n_pairs: int) -> List[SparseRow]:
    """
    Rows saying that no interface signals, pair by pair.

    For each pair, first the rows for Bob's interface (Bob's input varied,
    his output summed, everything else fixed), then the rows for Alice's.
    Within a family rows follow increasing base position. For one pair
    the first row is +p0 +p1 -p2 -p3 and the fifth is +p0 +p4 -p8 -p12.
    """
    rows: List[SparseRow] = []
    size = 16 ** n_pairs
    one = Fraction(1)
    for pair in range(n_pairs):
        scale = 16 ** (n_pairs - 1 - pair)
        # digit offsets: v -> 2, y -> 1, u -> 8, x -> 4
        for step_input, step_output in ((2, 1), (8, 4)):
            for base in range(size):
                digit = (base // scale) % 16
                if digit & (step_input | step_output):
                    continue
                rows.append({
                    base: one,
                    base + step_output * scale: one,
                    base + step_input * scale: -one,
                    base + (step_input + step_output) * scale: -one,
                })
    return rows


def xor_objective(n_pairs: int, u, v) -> SparseRow:
    """+1 where the parity of Alice's bits is 0, -1 where it is 1, at inputs (u, v)."""
    u = (u,) if isinstance(u, int) else tuple(u)
    v = (v,) if isinstance(v, int) else tuple(v)
    objective: SparseRow = {}
    for x in itertools.product((0, 1), repeat=n_pairs):
        sign = Fraction(1) if sum(x) % 2 == 0 else Fraction(-1)
        for y in itertools.product((0, 1), repeat=n_pairs):
            objective[canonical_index(x, y, u, v, n_pairs)] = sign
    return objective


def _stack(ns_rows: List[SparseRow], probs: Sequence[Fraction]):
    rows: List[SparseRow] = list(ns_rows)
    rows += [{j: -a for j, a in row.items()} for row in ns_rows]
    size = len(probs)
    rows += [{j: Fraction(1)} for j in range(size)]
    rows += [{j: Fraction(-1)} for j in range(size)]
    rhs = [Fraction(0)] * (2 * len(ns_rows)) + list(probs) + list(probs)
    return rows, rhs


def build_xor_primal(marginal: ConditionalBox, u=0, v=0) -> LinearProgram:
    """
    Primal program for the parity of Alice's bits at inputs (u, v).

    Rows are [A_ns; -A_ns; +I; -I] with right-hand side (0, 0, P, P):
    Delta is non-signaling and |Delta| <= P entrywise. The optimum is
    twice the largest distance from uniform any partition can achieve.

    Example:
        lp = build_xor_primal(make_isotropic_box(Fraction(1, 10)))
        lp.n_vars, lp.n_rows   # (16, 48)
    """
    require_nonsignaling(marginal, "build_xor_primal")
    n = marginal.n_pairs
    probs = [to_exact(p) for p in marginal.probs]
    rows, rhs = _stack(nonsignaling_rows(n), probs)
    return LinearProgram(16 ** n, tuple(rows), tuple(rhs), xor_objective(n, u, v))


def tensor_lp(programs: Sequence[LinearProgram]) -> LinearProgram:
    """
    Kronecker product of programs: rows, right-hand sides and objectives
    multiply factor by factor, in row-major order of the factor rows.
    """
    if not programs:
        raise DomainError("tensor_lp needs at least one program")
    rows = list(programs[0].rows)
    rhs = list(programs[0].rhs)
    objective = dict(programs[0].objective)
    n_vars = programs[0].n_vars
    for program in programs[1:]:
        m = program.n_vars
        rows = [{i * m + j: a * b for i, a in left.items() for j, b in right.items()}
                for left in rows for right in program.rows]
        rhs = [r * s for r in rhs for s in program.rhs]
        objective = {i * m + j: a * b for i, a in objective.items() for j, b in program.objective.items()}
        n_vars *= m
    return LinearProgram(n_vars, tuple(rows), tuple(rhs), objective)


def tensor_xor_primal(marginals: Sequence[ConditionalBox], u, v) -> LinearProgram:
    """Tensor-form program of independent 1-pair marginals."""
    u = (u,) if isinstance(u, int) else tuple(u)
    v = (v,) if isinstance(v, int) else tuple(v)
    if not len(u) == len(v) == len(marginals):
        raise DimensionError("one input pair per marginal is required")
    return tensor_lp([build_xor_primal(m, ui, vi) for m, ui, vi in zip(marginals, u, v)])


def solve_lp(lp: LinearProgram) -> Tuple[Fraction, List[Fraction]]:
    """
    Exact optimum of the program.

    Returns:
        (optimal value, optimal Delta)

    Raises:
        SolverError: infeasible or unbounded program (malformed input)
    """
    result = solve_bounded(lp.n_vars, lp.rows, lp.rhs, lp.objective)
    logger.info("Solved LP with %d variables and %d rows: optimum %s (%d iterations)",
                lp.n_vars, lp.n_rows, result.value, result.iterations)
    return result.value, result.x


# ----------------------------------------------------------------------
# Single-box dual data
# ----------------------------------------------------------------------

_H = Fraction(1, 2)
_TAIL_UV0 = (0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0,
             0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1)
_TAIL_U1 = (0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0,
            0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1)

PRINTED_LAMBDA = {
    (0, 0): (_H, 0, _H, 0, _H, 0, _H, 0, 0, _H, 0, _H, 0, _H, 0, _H) + _TAIL_UV0,
    (0, 1): (0, _H, _H, 0, _H, 0, _H, 0, _H, 0, 0, _H, 0, _H, 0, _H) + _TAIL_UV0,
    (1, 0): (_H, 0, _H, 0, 0, _H, _H, 0, 0, _H, 0, _H, _H, 0, 0, _H) + _TAIL_U1,
    (1, 1): (_H, 0, 0, _H, 0, _H, _H, 0, 0, _H, _H, 0, _H, 0, 0, _H) + _TAIL_U1,
}

# objective rows as printed; (1, 0) is shifted by four positions and
# (1, 1) repeats the (0, 1) row, so neither matches the derived objective
PRINTED_OBJECTIVE = {
    (0, 0): {0: 1, 1: 1, 4: -1, 5: -1},
    (0, 1): {2: 1, 3: 1, 6: -1, 7: -1},
    (1, 0): {4: 1, 5: 1, 8: -1, 9: -1},
    (1, 1): {2: 1, 3: 1, 6: -1, 7: -1},
}


@dataclass(frozen=True)
class SingleBoxDual:
    """Constraint matrix, objective, rhs layout and dual vector for one input pair."""
    rows: Tuple[SparseRow, ...]
    objective: SparseRow
    rhs_layout: Tuple[Optional[int], ...]
    lam: Tuple[Fraction, ...]
    printed_objective_matches: bool

    def rhs(self, marginal: ConditionalBox) -> List[Fraction]:
        """Right-hand side for a marginal: 0 or the marginal entry at the given position."""
        return [Fraction(0) if j is None else to_exact(marginal.probs[j]) for j in self.rhs_layout]


def printed_dual_data(u: int, v: int) -> SingleBoxDual:
    """
    The single-box program data and dual optimum for input pair (u, v).

    The objective is derived from its definition; whether the printed
    objective row agrees is recorded in printed_objective_matches (it does
    not for (1, 0) and (1, 1)).
    """
    if (u, v) not in PRINTED_LAMBDA:
        raise DomainError(f"inputs must be bits, got ({u}, {v})")
    ns = nonsignaling_rows(1)
    rows, _ = _stack(ns, [Fraction(0)] * 16)
    layout = (None,) * 16 + tuple(range(16)) * 2
    objective = xor_objective(1, u, v)
    printed = {j: Fraction(c) for j, c in PRINTED_OBJECTIVE[(u, v)].items()}
    return SingleBoxDual(rows=tuple(rows), objective=objective, rhs_layout=layout,
                         lam=tuple(Fraction(x) for x in PRINTED_LAMBDA[(u, v)]),
                         printed_objective_matches=(printed == objective))


appendix_c_data = printed_dual_data


def violating_mass(marginal: ConditionalBox) -> Fraction:
    """Sum of the CHSH-violating cells of a 1-pair box over all four inputs."""
    total = Fraction(0)
    for position, x, y, u, v in CanonicalLayout(1).positions():
        if not satisfies_chsh(x[0], y[0], u[0], v[0]):
            total += to_exact(marginal.probs[position])
    return total


def single_box_certificate(marginal: ConditionalBox, u: int, v: int) -> DualCertificate:
    data = printed_dual_data(u, v)
    return DualCertificate(lam=data.lam, claimed_bound=violating_mass(marginal))


def _kron(vectors: Sequence[Sequence[Fraction]]) -> Tuple[Fraction, ...]:
    result = list(vectors[0])
    for vector in vectors[1:]:
        result = [a * b for a in result for b in vector]
    return tuple(result)


def tensor_certificate(per_box_inputs: Sequence[Tuple[int, int]],
                       marginals: Sequence[ConditionalBox], expand: bool = True) -> DualCertificate:
    """
    Tensor product of the single-box dual vectors.

    The product is dual feasible for the tensor-form program and its
    objective is the product of the per-box violating masses. With
    expand=False the 48^n-entry product is not formed; the certificate
    keeps the factors instead.

    Example:
        box = make_isotropic_box(Fraction(1, 10))
        tensor_certificate([(0, 0), (0, 0)], [box, box]).claimed_bound   # 4/25
    """
    if not per_box_inputs:
        raise DomainError("tensor_certificate needs at least one box")
    if len(per_box_inputs) != len(marginals):
        raise DimensionError("one marginal per input pair is required")
    factors = tuple(printed_dual_data(u, v).lam for u, v in per_box_inputs)
    bound = Fraction(1)
    for marginal in marginals:
        bound *= violating_mass(marginal)
    if not expand:
        return DualCertificate(lam=(), claimed_bound=bound, factors=factors)
    return DualCertificate(lam=_kron(factors), claimed_bound=bound)


def certificate_violations(lp: LinearProgram, cert: DualCertificate) -> List[str]:
    """Every reason the certificate fails; empty when it proves the bound."""
    if len(cert.lam) != lp.n_rows:
        raise DimensionError(f"certificate has {len(cert.lam)} entries, program has {lp.n_rows} rows")
    problems = []
    negative = [i for i, x in enumerate(cert.lam) if x < 0]
    if negative:
        problems.append(f"negative multiplier at row {negative[0]}")
    combined: SparseRow = {}
    for row, x in zip(lp.rows, cert.lam):
        if x == 0:
            continue
        for j, a in row.items():
            combined[j] = combined.get(j, 0) + x * a
    combined = {j: a for j, a in combined.items() if a != 0}
    target = {j: b for j, b in lp.objective.items() if b != 0}
    if combined != target:
        differing = sorted(j for j in set(combined) | set(target)
                           if combined.get(j, 0) != target.get(j, 0))
        problems.append(f"A^T lambda differs from b at variable {differing[0]}")
    value = sum((x * r for x, r in zip(cert.lam, lp.rhs) if x), Fraction(0))
    if value != cert.claimed_bound:
        problems.append(f"c^T lambda = {value}, claimed {cert.claimed_bound}")
    return problems


def verify_certificate(lp: LinearProgram, cert: DualCertificate) -> bool:
    """
    Exact weak-duality check: lambda >= 0, A^T lambda = b, c^T lambda = bound.

    A passing certificate proves that the program optimum is at most
    claimed_bound.
    """
    problems = certificate_violations(lp, cert)
    if problems:
        logger.info("Certificate rejected: %s", "; ".join(problems))
        return False
    logger.info("Certificate verified: bound %s over %d rows", cert.claimed_bound, lp.n_rows)
    return True


def verify_tensor_certificate(per_box_inputs: Sequence[Tuple[int, int]],
                              marginals: Sequence[ConditionalBox],
                              cert: Optional[DualCertificate] = None) -> bool:
    """
    Factorwise verification of a tensor certificate.

    The tensor program's constraint matrix, objective and rhs are Kronecker
    products, so A^T (x) lambda_i = (x) A_i^T lambda_i and the claimed bound
    multiplies; checking each factor exactly settles the product without
    building the 48^n-row program.

    Args:
        per_box_inputs: (u, v) for every box
        marginals: One 1-pair marginal per box
        cert: Factored certificate to check; defaults to the stored duals
    """
    if len(per_box_inputs) != len(marginals):
        raise DimensionError("one marginal per input pair is required")
    if cert is None:
        cert = tensor_certificate(per_box_inputs, marginals, expand=False)
    if not cert.factored:
        raise PreconditionError("factorwise verification needs a factored certificate")
    if len(cert.factors) != len(marginals):
        raise DimensionError(f"certificate has {len(cert.factors)} factors for {len(marginals)} boxes")
    product = Fraction(1)
    for (u, v), marginal, lam in zip(per_box_inputs, marginals, cert.factors):
        mass = violating_mass(marginal)
        if not verify_certificate(build_xor_primal(marginal, u, v),
                                  DualCertificate(lam=lam, claimed_bound=mass)):
            return False
        product *= mass
    if product != cert.claimed_bound:
        logger.info("Certificate rejected: factors prove %s, claimed %s", product, cert.claimed_bound)
        return False
    logger.info("Certificate verified factorwise: bound %s over %d boxes", product, len(marginals))
    return True


# ----------------------------------------------------------------------
# Closed-form bounds
# ----------------------------------------------------------------------

def _check_errors(errors: Sequence[Number]) -> List[Fraction]:
    exact = [to_exact(e) for e in errors]
    for e in exact:
        if not 0 <= e <= Fraction(1, 4):
            raise DomainError(f"per-box error {e} outside [0, 1/4]")
    return exact


def certified_xor_bound(errors: Optional[Sequence[Number]] = None,
                        mixture: Optional[Sequence[Tuple[Number, Sequence[Number]]]] = None) -> Fraction:
    """
    Certified bound on the distance of the parity of Alice's bits.

    Independent isotropic boxes give 1/2 * prod(4 eps_i); a mixture of such
    products gives the weighted sum of the component bounds.

    Args:
        errors: Per-box CHSH errors of one product
        mixture: (weight, errors) components; weights must sum to 1

    Example:
        certified_xor_bound([Fraction(1, 10)] * 2)   # Fraction(2, 25)
    """
    if (errors is None) == (mixture is None):
        raise DomainError("give either errors or mixture")
    if mixture is None:
        mixture = [(Fraction(1), errors)]
    total_weight = Fraction(0)
    bound = Fraction(0)
    for weight, component in mixture:
        weight = to_exact(weight)
        if weight < 0:
            raise DomainError(f"negative mixture weight {weight}")
        total_weight += weight
        product = Fraction(1, 2)
        for e in _check_errors(component):
            product *= 4 * e
        bound += weight * product
    if total_weight != 1:
        raise DomainError(f"mixture weights sum to {total_weight}, not 1")
    return bound


def certified_xor_bound_for_box(box: ConditionalBox) -> Fraction:
    """
    Bound for an arbitrary (possibly correlated) n-pair box.

    The box is depolarized first, which turns it into a mixture of products
    of isotropic boxes without changing the all-pairs violation mass; the
    mixture bound is then 1/2 * 4^n * that mass.
    """
    depolarized = depolarize(box)
    return Fraction(1, 2) * 4 ** box.n_pairs * to_exact(violation_mass(depolarized))


def average_epsilon_inequality(errors: Sequence[Number]) -> Tuple[Fraction, Fraction]:
    """
    Both sides of  sum_K prod_{i in K} eps_i <= sum_K mean^|K|  over all
    subsets K of the boxes.
    """
    exact = [to_exact(e) for e in errors]
    if not exact:
        raise DomainError("need at least one error value")
    mean = sum(exact, Fraction(0)) / len(exact)
    lhs = Fraction(0)
    rhs = Fraction(0)
    for size in range(len(exact) + 1):
        for subset in itertools.combinations(exact, size):
            term = Fraction(1)
            for e in subset:
                term *= e
            lhs += term
            rhs += mean ** size
    return lhs, rhs


# ----------------------------------------------------------------------
# Delta <-> partition element
# ----------------------------------------------------------------------

def objective_value(lp: LinearProgram, delta: Sequence[Fraction]) -> Fraction:
    return sum((b * to_exact(delta[j]) for j, b in lp.objective.items()), Fraction(0))


def delta_to_element(marginal: ConditionalBox, delta: Sequence[Number]) -> Tuple[Fraction, ConditionalBox]:
    """
    Partition element (p, P^{Z=0}) encoded by a feasible Delta.

    p = (1 + sum_xy Delta(xy|0..0)) / 2 and P^{Z=0} = (P + Delta) / (2p),
    or the marginal itself when p = 0.

    Raises:
        PreconditionError: Delta violates |Delta| <= P or non-signaling
    """
    n = marginal.n_pairs
    if len(delta) != 16 ** n:
        raise DimensionError(f"Delta has {len(delta)} entries, expected {16 ** n}")
    delta = [to_exact(d) for d in delta]
    probs = [to_exact(p) for p in marginal.probs]
    for j, (d, p) in enumerate(zip(delta, probs)):
        if abs(d) > p:
            raise PreconditionError(f"|Delta| <= P violated at position {j}")
    zeros = (0,) * n
    p = (1 + sum(delta[canonical_index(x, y, zeros, zeros, n)]
                 for x in itertools.product((0, 1), repeat=n)
                 for y in itertools.product((0, 1), repeat=n))) / 2
    if p == 0:
        return p, ConditionalBox(n, tuple(probs))
    try:
        box = ConditionalBox(n, tuple((m + d) / (2 * p) for m, d in zip(probs, delta)))
    except PreconditionError as e:
        raise PreconditionError(f"Delta is not non-signaling: {e}") from e
    require_nonsignaling(box, "delta_to_element")
    return p, box


def element_to_delta(marginal: ConditionalBox, weight: Number, box: ConditionalBox) -> List[Fraction]:
    """Delta = 2p P^{Z=0} - P for an element satisfying p P^{Z=0} <= P."""
    p = to_exact(weight)
    if not 0 <= p <= 1:
        raise PreconditionError(f"element weight {p} is not a probability")
    delta = []
    for j, (b, m) in enumerate(zip(box.probs, marginal.probs)):
        b, m = to_exact(b), to_exact(m)
        if p * b > m:
            raise PreconditionError(f"dominance p.P^z <= P violated at position {j}")
        delta.append(2 * p * b - m)
    return delta


def delta_partition_roundtrip(marginal: ConditionalBox,
                              item: Union[Sequence[Number], Tuple[Number, ConditionalBox]]):
    """
    Convert a Delta vector into (p, P^{Z=0}) or an element back into Delta.

    The objective value of Delta equals twice the element's contribution
    to the distance from uniform.
    """
    if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], ConditionalBox):
        return element_to_delta(marginal, item[0], item[1])
    return delta_to_element(marginal, item)
