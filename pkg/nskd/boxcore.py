"""
Boxcore Module - Binary Non-Signaling Boxes

This module provides construction, validation and transformation of
bipartite (and n-pair) conditional distributions P(x, y | u, v) with binary
inputs and outputs:
- The canonical vector layout shared by every other module
- Constructors for PR, isotropic, quantum, singlet and deterministic boxes
- CHSH error, non-signaling validation and the locality test
- Tensor products, output noise and exact depolarization
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, DomainError, PreconditionError
from .rationals import FLOAT, RATIONAL, Number, arithmetic_of, coerce, to_exact
from .simplex import solve_bounded

logger = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-9
LOCALITY_TOLERANCE = 1e-9

Bits = Tuple[int, ...]


# ----------------------------------------------------------------------
# Canonical layout
# ----------------------------------------------------------------------

def _digit(x: int, y: int, u: int, v: int) -> int:
    return 8 * u + 4 * x + 2 * v + y


def _as_bits(value, n_pairs: int, name: str) -> Bits:
    if isinstance(value, int):
        value = (value,)
    bits = tuple(int(b) for b in value)
    if len(bits) != n_pairs:
        raise DimensionError(f"{name} has {len(bits)} bits, expected {n_pairs}")
    if any(b not in (0, 1) for b in bits):
        raise DomainError(f"{name} must contain only bits, got {bits}")
    return bits


def canonical_index(x, y, u, v, n_pairs: int = 1) -> int:
    """
    Flat position of P(x, y | u, v) in the canonical layout.

    A single pair occupies the digit 8u + 4x + 2v + y; for several pairs the
    digits are read base 16 with the first pair most significant, which is
    the row-major tensor extension of the single-pair order.

    Args:
        x, y, u, v: Bit vectors (or single bits when n_pairs is 1)
        n_pairs (int): Number of Alice/Bob interface pairs

    Returns:
        int: Position in [0, 16**n_pairs)

    Example:
        canonical_index(0, 1, 0, 1)   # 3, i.e. P(01|01)
    """
    xs = _as_bits(x, n_pairs, "x")
    ys = _as_bits(y, n_pairs, "y")
    us = _as_bits(u, n_pairs, "u")
    vs = _as_bits(v, n_pairs, "v")
    position = 0
    for i in range(n_pairs):
        position = 16 * position + _digit(xs[i], ys[i], us[i], vs[i])
    return position


def coordinates(position: int, n_pairs: int = 1) -> Tuple[Bits, Bits, Bits, Bits]:
    """Inverse of canonical_index: position -> (x, y, u, v)."""
    if not 0 <= position < 16 ** n_pairs:
        raise DimensionError(f"position {position} outside layout of {n_pairs} pair(s)")
    digits = []
    for _ in range(n_pairs):
        digits.append(position % 16)
        position //= 16
    digits.reverse()
    x = tuple((d >> 2) & 1 for d in digits)
    y = tuple(d & 1 for d in digits)
    u = tuple((d >> 3) & 1 for d in digits)
    v = tuple((d >> 1) & 1 for d in digits)
    return x, y, u, v


@dataclass(frozen=True)
class CanonicalLayout:
    """Index map between (x, y, u, v) bit vectors and flat positions."""
    n_pairs: int

    @property
    def size(self) -> int:
        return 16 ** self.n_pairs

    def index(self, x, y, u, v) -> int:
        return canonical_index(x, y, u, v, self.n_pairs)

    def coordinates(self, position: int) -> Tuple[Bits, Bits, Bits, Bits]:
        return coordinates(position, self.n_pairs)

    def positions(self):
        """Yield (position, x, y, u, v) over the whole layout."""
        for position in range(self.size):
            yield (position, *coordinates(position, self.n_pairs))


def satisfies_chsh(x: int, y: int, u: int, v: int) -> bool:
    return (x ^ y) == (u & v)


# ----------------------------------------------------------------------
# Box type and validation report
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalBox:
    """
    Conditional distribution P(x, y | u, v) over n_pairs binary interface pairs.

    Attributes:
        n_pairs (int): Number of Alice/Bob interface pairs
        probs (tuple): Entries in the canonical layout
        arithmetic (str): "rational" (Fractions) or "float"
    """
    n_pairs: int
    probs: Tuple[Number, ...]
    arithmetic: str = RATIONAL

    def __post_init__(self):
        if self.n_pairs < 1:
            raise DimensionError("a box needs at least one interface pair")
        if self.arithmetic not in (RATIONAL, FLOAT):
            raise DomainError(f"unknown arithmetic '{self.arithmetic}'")
        probs = tuple(coerce(p, self.arithmetic) for p in self.probs)
        if len(probs) != 16 ** self.n_pairs:
            raise DimensionError(
                f"{len(probs)} entries given, layout of {self.n_pairs} pair(s) needs {16 ** self.n_pairs}")
        object.__setattr__(self, 'probs', probs)

        tolerance = self.tolerance
        worst = min(probs)
        if worst < -tolerance:
            position = probs.index(worst)
            raise PreconditionError(f"negative entry {worst} at position {position}")
        for inputs, total in self.input_sums().items():
            if abs(total - 1) > tolerance:
                raise PreconditionError(f"entries for inputs {inputs} sum to {total}, not 1")

    @property
    def tolerance(self) -> Number:
        return 0 if self.arithmetic == RATIONAL else FLOAT_TOLERANCE

    @property
    def layout(self) -> CanonicalLayout:
        return CanonicalLayout(self.n_pairs)

    def entry(self, x, y, u, v) -> Number:
        return self.probs[canonical_index(x, y, u, v, self.n_pairs)]

    def input_sums(self) -> Dict[Tuple[Bits, Bits], Number]:
        sums: Dict[Tuple[Bits, Bits], Number] = {}
        for position, _, _, u, v in self.layout.positions():
            sums[(u, v)] = sums.get((u, v), 0) + self.probs[position]
        return sums

    def as_tensor(self) -> np.ndarray:
        """Entries as a numpy array with axes (u, x, v, y) per pair."""
        dtype = object if self.arithmetic == RATIONAL else float
        return np.array(self.probs, dtype=dtype).reshape((2,) * (4 * self.n_pairs))

    def with_arithmetic(self, arithmetic: str) -> 'ConditionalBox':
        return ConditionalBox(self.n_pairs, self.probs, arithmetic)

    def allclose(self, other: 'ConditionalBox', atol: float = 1e-12) -> bool:
        if self.n_pairs != other.n_pairs:
            return False
        return bool(np.allclose(np.array(self.probs, dtype=float),
                                np.array(other.probs, dtype=float), atol=atol))


def box_from_tensor(tensor: np.ndarray, arithmetic: str) -> ConditionalBox:
    n_pairs = tensor.ndim // 4
    return ConditionalBox(n_pairs, tuple(tensor.reshape(-1).tolist()), arithmetic)


@dataclass
class ValidationReport:
    """Outcome of a validation pass; failures are reported, never raised."""
    valid: bool
    message: str = "ok"
    location: Optional[str] = None
    worst_violation: Number = 0
    checks: int = 0
    failed_checks: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'valid': self.valid,
            'message': self.message,
            'location': self.location,
            'worst_violation': str(self.worst_violation),
            'checks': self.checks,
            'failed_checks': list(self.failed_checks),
        }


# ----------------------------------------------------------------------
# Constructors
# ----------------------------------------------------------------------

def _from_cells(cell, arithmetic: str) -> ConditionalBox:
    probs = [None] * 16
    for position, x, y, u, v in CanonicalLayout(1).positions():
        probs[position] = cell(x[0], y[0], u[0], v[0])
    return ConditionalBox(1, tuple(probs), arithmetic)


def _check_probability(value: Number, name: str) -> None:
    if not 0 <= value <= 1:
        raise DomainError(f"{name} = {value} is not a probability")


def make_pr_box() -> ConditionalBox:
    """The PR box: X xor Y = U.V with certainty and uniform outputs."""
    half = Fraction(1, 2)
    return _from_cells(lambda x, y, u, v: half if satisfies_chsh(x, y, u, v) else Fraction(0), RATIONAL)


def make_isotropic_box(epsilon: Number) -> ConditionalBox:
    """
    Unbiased box with CHSH error epsilon on every input pair.

    Satisfying cells hold (1 - epsilon)/2, violating cells epsilon/2.
    The arithmetic follows the argument: a float gives a float box.
    """
    _check_probability(epsilon, "epsilon")
    arithmetic = arithmetic_of(epsilon)
    eps = coerce(epsilon, arithmetic)
    good, bad = (1 - eps) / 2, eps / 2
    return _from_cells(lambda x, y, u, v: good if satisfies_chsh(x, y, u, v) else bad, arithmetic)


def make_quantum_box(delta: Number, noise: Number) -> ConditionalBox:
    """
    The quantum box used for key agreement.

    Input (0,0) is correlated with disagreement probability delta; the other
    three inputs carry CHSH-satisfying cells 3/8 - noise/2 and violating
    cells 1/8 + noise/2. With no noise the CHSH error is 3/16.
    """
    arithmetic = arithmetic_of(delta, noise)
    delta, noise = coerce(delta, arithmetic), coerce(noise, arithmetic)
    half, three_eighths, eighth = (coerce(Fraction(n, d), arithmetic) for n, d in ((1, 2), (3, 8), (1, 8)))

    def cell(x, y, u, v):
        if u == 0 and v == 0:
            return half - delta / 2 if x == y else delta / 2
        return three_eighths - noise / 2 if satisfies_chsh(x, y, u, v) else eighth + noise / 2

    corners = [half - delta / 2, delta / 2, three_eighths - noise / 2, eighth + noise / 2]
    if min(corners) < 0:
        raise DomainError(f"delta={delta}, noise={noise} produce a negative entry")
    return _from_cells(cell, arithmetic)


def make_singlet_box(a0: float, a1: float, b0: float, b1: float) -> ConditionalBox:
    """
    Polarization measurements on a singlet, angles in degrees.

    P(x = y | u, v) = sin^2(alpha_u - beta_v) with uniform marginals, so
    equal angles give anticorrelated outputs. The bases (90, 60, 0, 30)
    reproduce make_quantum_box(0, 0).
    """
    alphas = (math.radians(a0), math.radians(a1))
    betas = (math.radians(b0), math.radians(b1))

    def cell(x, y, u, v):
        agree = math.sin(alphas[u] - betas[v]) ** 2
        return agree / 2 if x == y else (1 - agree) / 2

    return _from_cells(cell, FLOAT)


def make_deterministic_box(x0: int, x1: int, y0: int, y1: int) -> ConditionalBox:
    """Local deterministic strategy x = x_u, y = y_v."""
    xs, ys = (x0, x1), (y0, y1)
    one, zero = Fraction(1), Fraction(0)
    return _from_cells(lambda x, y, u, v: one if (x == xs[u] and y == ys[v]) else zero, RATIONAL)


def deterministic_strategies() -> List[Tuple[int, int, int, int]]:
    """All 16 strategies (x0, x1, y0, y1) in lexicographic order."""
    return list(itertools.product((0, 1), repeat=4))


def tsirelson_error() -> float:
    """CHSH error of the optimal quantum box, (2 - sqrt 2)/4."""
    return (2 - math.sqrt(2)) / 4


# ----------------------------------------------------------------------
# Measures
# ----------------------------------------------------------------------

def _require_single_pair(box: ConditionalBox, operation: str) -> None:
    if box.n_pairs != 1:
        raise DimensionError(f"{operation} needs a 1-pair box, got {box.n_pairs} pairs")


def chsh_error(box: ConditionalBox) -> Number:
    """1 - (1/4) * sum of the CHSH-satisfying cells of a 1-pair box."""
    _require_single_pair(box, "chsh_error")
    satisfied = sum(box.probs[p] for p, x, y, u, v in box.layout.positions()
                    if satisfies_chsh(x[0], y[0], u[0], v[0]))
    return 1 - satisfied / 4


def input_errors(box: ConditionalBox) -> Dict[Tuple[int, int], Number]:
    """Per-input CHSH violation probability of a 1-pair box."""
    _require_single_pair(box, "input_errors")
    errors = {(u, v): 0 for u in (0, 1) for v in (0, 1)}
    for p, x, y, u, v in box.layout.positions():
        if not satisfies_chsh(x[0], y[0], u[0], v[0]):
            errors[(u[0], v[0])] += box.probs[p]
    return errors


def violation_mass(box: ConditionalBox) -> Number:
    """Input-averaged probability that every pair violates CHSH at once."""
    total = coerce(0, box.arithmetic)
    for p, x, y, u, v in box.layout.positions():
        if all(not satisfies_chsh(*cell) for cell in zip(x, y, u, v)):
            total += box.probs[p]
    return total / 4 ** box.n_pairs


def is_unbiased(box: ConditionalBox) -> bool:
    """Every single-interface output marginal equals 1/2 for every input."""
    half = Fraction(1, 2)
    tensor = box.as_tensor()
    output_axes = [a for i in range(box.n_pairs) for a in (4 * i + 1, 4 * i + 3)]
    for axis in output_axes:
        others = tuple(a for a in output_axes if a != axis)
        marginal = tensor.sum(axis=others, keepdims=True) if others else tensor
        if any(abs(m - half) > box.tolerance for m in np.ravel(marginal.take(0, axis=axis))):
            return False
    return True


# ----------------------------------------------------------------------
# Non-signaling
# ----------------------------------------------------------------------

def interface_names(n_pairs: int) -> List[str]:
    return [f"A{i}" for i in range(n_pairs)] + [f"B{i}" for i in range(n_pairs)]


def _interface_axes(name: str) -> Tuple[int, int]:
    """(input axis, output axis) of an interface in the tensor view."""
    pair = int(name[1:])
    if name[0] == 'A':
        return 4 * pair, 4 * pair + 1
    return 4 * pair + 2, 4 * pair + 3


def _signaling_of(tensor: np.ndarray, subset: Sequence[str]) -> Tuple[Number, Optional[str]]:
    """
    Largest dependence of the complement's marginal on the inputs of subset.

    Returns the violation size and the interface whose input it depends on.
    """
    output_axes = tuple(_interface_axes(name)[1] for name in subset)
    marginal = tensor.sum(axis=output_axes, keepdims=True)
    worst, culprit = 0, None
    for name in subset:
        input_axis = _interface_axes(name)[0]
        diff = marginal.take([0], axis=input_axis) - marginal.take([1], axis=input_axis)
        size = max(abs(d) for d in np.ravel(diff))
        if size > worst:
            worst, culprit = size, name
    return worst, culprit


def validate_nonsignaling(box: ConditionalBox, tolerance: Optional[Number] = None) -> ValidationReport:
    """
    Check that no interface can signal to the others.

    For each of the 2n interfaces, the marginal of the remaining outputs
    must not depend on that interface's input. Every subset of interfaces is
    checked as well; the single-interface conditions imply the subset ones,
    so a subset failure always comes with a single-interface failure.

    Args:
        box (ConditionalBox): Normalized box to check
        tolerance: Allowed violation (0 in rational mode, 1e-9 for floats)

    Returns:
        ValidationReport: pass/fail, worst violation and the named interface
    """
    if tolerance is None:
        tolerance = box.tolerance
    tensor = box.as_tensor()
    names = interface_names(box.n_pairs)
    report = ValidationReport(valid=True)

    worst, location = 0, None
    for size in range(1, len(names) + 1):
        for subset in itertools.combinations(names, size):
            violation, culprit = _signaling_of(tensor, subset)
            report.checks += 1
            if violation > tolerance:
                report.failed_checks.append("+".join(subset))
            if violation > worst:
                worst, location = violation, culprit

    report.worst_violation = worst
    if report.failed_checks:
        report.valid = False
        report.location = location
        report.message = f"interface {location} signals (violation {worst})"
        logger.debug("Signaling box: %s", report.message)
    return report


def require_nonsignaling(box: ConditionalBox, operation: str) -> None:
    report = validate_nonsignaling(box)
    if not report.valid:
        raise PreconditionError(f"{operation} needs a non-signaling box: {report.message}")


# ----------------------------------------------------------------------
# Locality
# ----------------------------------------------------------------------

def locality_residual(box: ConditionalBox) -> Fraction:
    """
    Smallest L1 distance from the box to the convex hull of the 16
    deterministic strategies, computed exactly.

    The residual LP has weights w_d >= 0 and slack pairs r+, r- >= 0 with
    sum_d w_d D_d + r+ - r- = P; maximizing -sum(r) gives minus the residual.
    """
    strategies = [make_deterministic_box(*s) for s in deterministic_strategies()]
    target = [to_exact(p) for p in box.probs]
    n_weights = len(strategies)
    rows, rhs = [], []
    for cell in range(16):
        coeffs = {d: Fraction(1) for d, det in enumerate(strategies) if det.probs[cell]}
        coeffs[n_weights + cell] = Fraction(1)
        coeffs[n_weights + 16 + cell] = Fraction(-1)
        rows.append(coeffs)
        rhs.append(target[cell])
        rows.append({j: -c for j, c in coeffs.items()})
        rhs.append(-target[cell])
    n_vars = n_weights + 32
    for j in range(n_vars):
        rows.append({j: Fraction(-1)})
        rhs.append(Fraction(0))
    objective = {j: Fraction(-1) for j in range(n_weights, n_vars)}
    result = solve_bounded(n_vars, rows, rhs, objective)
    return -result.value


def is_local(box: ConditionalBox) -> bool:
    """
    True iff the 1-pair box is a convex mix of deterministic strategies.

    Rational boxes must have residual exactly 0; float boxes are converted
    exactly and may leave a residual up to 1e-9.
    """
    _require_single_pair(box, "is_local")
    require_nonsignaling(box, "is_local")
    residual = locality_residual(box)
    if box.arithmetic == RATIONAL:
        return residual == 0
    return residual <= LOCALITY_TOLERANCE


# ----------------------------------------------------------------------
# Transformations
# ----------------------------------------------------------------------

def tensor_boxes(boxes: Sequence[ConditionalBox]) -> ConditionalBox:
    """
    Product of independent boxes in the canonical tensor layout.

    Example:
        pr2 = tensor_boxes([make_pr_box(), make_pr_box()])
        pr2.entry((0, 0), (0, 0), (0, 0), (0, 0))   # Fraction(1, 4)
    """
    if not boxes:
        raise DomainError("tensor_boxes needs at least one box")
    arithmetic = FLOAT if any(b.arithmetic == FLOAT for b in boxes) else RATIONAL
    probs = [coerce(p, arithmetic) for p in boxes[0].probs]
    for box in boxes[1:]:
        factor = [coerce(p, arithmetic) for p in box.probs]
        probs = [a * b for a in probs for b in factor]
    return ConditionalBox(sum(b.n_pairs for b in boxes), tuple(probs), arithmetic)


def _relabel(pair_map, box: ConditionalBox, pair: int, weight: Number, acc: List[Number]) -> None:
    scale = 16 ** (box.n_pairs - 1 - pair)
    for position, p in enumerate(box.probs):
        if p == 0:
            continue
        digit = (position // scale) % 16
        acc[position + (pair_map[digit] - digit) * scale] += weight * p


def _digit_map(function) -> List[int]:
    table = [0] * 16
    for x, y, u, v in itertools.product((0, 1), repeat=4):
        table[_digit(x, y, u, v)] = _digit(*function(x, y, u, v))
    return table


def _flip_outputs(x, y, u, v):
    return x ^ 1, y ^ 1, u, v


FIRST_STEP = (
    lambda x, y, u, v: (x, y, u, v),
    _flip_outputs,
)

SECOND_STEP = (
    lambda x, y, u, v: (x, y, u, v),
    lambda x, y, u, v: (x ^ u, y, u, v ^ 1),
    lambda x, y, u, v: (x, y ^ v, u ^ 1, v),
    lambda x, y, u, v: (x ^ u ^ 1, y ^ v, u ^ 1, v ^ 1),
)

DEPOLARIZING_MAPS = [
    _digit_map(lambda x, y, u, v, f=first, g=second: g(*f(x, y, u, v)))
    for first in FIRST_STEP for second in SECOND_STEP
]


def depolarize(box: ConditionalBox) -> ConditionalBox:
    """
    Exact average over the eight CHSH-preserving local maps, pair by pair.

    Each map either keeps or flips both outputs, then applies one of four
    input/output relabelings that move every input pair onto every other.
    The result is unbiased with input-independent error on each pair, and
    per-pair CHSH errors are unchanged.
    """
    require_nonsignaling(box, "depolarize")
    weight = coerce(Fraction(1, len(DEPOLARIZING_MAPS)), box.arithmetic)
    current = box
    for pair in range(box.n_pairs):
        acc: List[Number] = [coerce(0, box.arithmetic)] * len(current.probs)
        for pair_map in DEPOLARIZING_MAPS:
            _relabel(pair_map, current, pair, weight, acc)
        current = ConditionalBox(box.n_pairs, tuple(acc), box.arithmetic)
    return current


def apply_output_noise(box: ConditionalBox, flip_probability: Number) -> ConditionalBox:
    """Flip every output bit independently with the given probability."""
    _check_probability(flip_probability, "flip probability")
    arithmetic = FLOAT if FLOAT in (box.arithmetic, arithmetic_of(flip_probability)) else RATIONAL
    p = coerce(flip_probability, arithmetic)
    tensor = box.with_arithmetic(arithmetic).as_tensor()
    for pair in range(box.n_pairs):
        for output_axis in (4 * pair + 1, 4 * pair + 3):
            tensor = (1 - p) * tensor + p * np.flip(tensor, axis=output_axis)
    return box_from_tensor(tensor, arithmetic)
