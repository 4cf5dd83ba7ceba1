"""
Partition Module - Box Partitions and Eavesdropper Attacks

A box partition is a weighted family of non-signaling boxes whose mixture is
the box Alice and Bob share; it models everything a non-signaling
eavesdropper can learn. This module provides:
- Partition validation and the distance-from-uniform security metric
- Reduction of any partition to a two-outcome one with the same distance
- The single-box erasure attack and its product over independent boxes
- The collective attack on n isotropic boxes
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .boxcore import (ConditionalBox, ValidationReport, canonical_index, chsh_error,
                      make_deterministic_box, make_isotropic_box, make_pr_box,
                      tensor_boxes, validate_nonsignaling)
from .errors import DimensionError, DomainError, PreconditionError
from .rationals import FLOAT, RATIONAL, Number, coerce, to_exact

logger = logging.getLogger(__name__)

KeyMap = Callable[[Tuple[int, ...]], int]

PR_LABEL = "PR"
FLOAT_TOLERANCE = 1e-9

# Violating cells (name, x, y, u, v) in the order their weights are listed
ERASURE_CELLS = (
    ("a2", 1, 0, 0, 0), ("a3", 0, 1, 0, 0),
    ("b2", 1, 0, 1, 0), ("b3", 0, 1, 1, 0),
    ("c2", 1, 0, 0, 1), ("c3", 0, 1, 0, 1),
    ("d1", 0, 0, 1, 1), ("d4", 1, 1, 1, 1),
)


def xor_key(outputs: Tuple[int, ...]) -> int:
    """Parity of Alice's output bits; the identity bit for one pair."""
    return sum(outputs) % 2


@dataclass(frozen=True)
class PartitionElement:
    weight: Number
    box: ConditionalBox
    label: str


@dataclass(frozen=True)
class BoxPartition:
    """
    Weighted family (p^z, P^z) whose mixture is the marginal box.

    The label of an element is the outcome symbol z the eavesdropper sees.
    """
    marginal: ConditionalBox
    elements: Tuple[PartitionElement, ...]

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(self.elements))

    @property
    def weights(self) -> List[Number]:
        return [e.weight for e in self.elements]

    @property
    def labels(self) -> List[str]:
        return [e.label for e in self.elements]

    @property
    def arithmetic(self) -> str:
        if self.marginal.arithmetic == FLOAT or any(isinstance(w, float) for w in self.weights):
            return FLOAT
        return RATIONAL

    def mixture(self) -> List[Number]:
        """Entrywise sum of weight * element box."""
        arithmetic = self.arithmetic
        total = [coerce(0, arithmetic)] * len(self.marginal.probs)
        for element in self.elements:
            w = coerce(element.weight, arithmetic)
            if w == 0:
                continue
            total = [t + w * coerce(p, arithmetic) for t, p in zip(total, element.box.probs)]
        return total


def trivial_partition(box: ConditionalBox) -> BoxPartition:
    return BoxPartition(box, (PartitionElement(coerce(1, box.arithmetic), box, "*"),))


@dataclass
class AttackReport:
    """Distance achieved by a partition for fixed inputs and key map."""
    distance: Number
    partition: BoxPartition
    u: Tuple[int, ...]
    v: Tuple[int, ...]
    key_map: str = "xor"

    def to_dict(self) -> Dict:
        return {
            'distance': str(self.distance),
            'u': list(self.u),
            'v': list(self.v),
            'key_map': self.key_map,
            'elements': len(self.partition.elements),
        }


# ----------------------------------------------------------------------
# Validation and distance
# ----------------------------------------------------------------------

def validate_partition(marginal: ConditionalBox, partition: BoxPartition,
                       tolerance: Optional[Number] = None) -> ValidationReport:
    """
    Check the partition invariants and report the first violation.

    Checks, in order: nonnegative weights, weights summing to 1, matching
    pair counts, non-signaling element boxes, the mixture reproducing the
    marginal, and for two-element partitions the dominance p.P^z <= P.

    Example:
        report = validate_partition(box, single_box_attack(box))
        report.valid   # True
    """
    if tolerance is None:
        tolerance = 0 if partition.arithmetic == RATIONAL and marginal.arithmetic == RATIONAL \
            else FLOAT_TOLERANCE
    report = ValidationReport(valid=True)

    def fail(message: str, location: str) -> ValidationReport:
        report.valid = False
        report.message = message
        report.location = location
        logger.debug("Invalid partition: %s at %s", message, location)
        return report

    for k, weight in enumerate(partition.weights):
        report.checks += 1
        if weight < -tolerance:
            return fail(f"negative weight {weight}", f"element {k}")
    total = sum(partition.weights)
    report.checks += 1
    if abs(total - 1) > tolerance:
        return fail(f"weights sum ≠ 1 (got {total})", "weights")

    if partition.marginal.probs != marginal.probs and not partition.marginal.allclose(marginal):
        return fail("partition is built on a different marginal", "marginal")
    for k, element in enumerate(partition.elements):
        report.checks += 1
        if element.box.n_pairs != marginal.n_pairs:
            return fail(f"element has {element.box.n_pairs} pairs, marginal {marginal.n_pairs}",
                        f"element {k}")
        box_report = validate_nonsignaling(element.box, tolerance if tolerance else None)
        if not box_report.valid:
            return fail(f"element box signals: {box_report.message}", f"element {k}")

    for position, (mixed, target) in enumerate(zip(partition.mixture(), marginal.probs)):
        report.checks += 1
        if abs(mixed - target) > tolerance:
            report.worst_violation = abs(mixed - target)
            return fail(f"mixture {mixed} differs from marginal {target}", f"position {position}")

    if len(partition.elements) == 2:
        for k, element in enumerate(partition.elements):
            for position, (p, target) in enumerate(zip(element.box.probs, marginal.probs)):
                report.checks += 1
                if element.weight * p > target + tolerance:
                    return fail("dominance p.P^z <= P violated", f"element {k}, position {position}")
    return report


def _alice_outputs(n_pairs: int):
    return itertools.product((0, 1), repeat=n_pairs)


def key_zero_probability(box: ConditionalBox, key_map: KeyMap, u, v) -> Number:
    """P(f(X) = 0 | u, v) for one box."""
    n = box.n_pairs
    total = coerce(0, box.arithmetic)
    for x in _alice_outputs(n):
        if key_map(x) != 0:
            continue
        for y in _alice_outputs(n):
            total += box.probs[canonical_index(x, y, u, v, n)]
    return total


def _as_inputs(value, n_pairs: int) -> Tuple[int, ...]:
    bits = (value,) if isinstance(value, int) else tuple(value)
    if len(bits) != n_pairs:
        raise DimensionError(f"input vector {bits} does not match {n_pairs} pair(s)")
    return bits


def distance_from_uniform(partition: BoxPartition, key_map: KeyMap = xor_key,
                          u=0, v=0, validate: bool = True) -> Number:
    """
    Distance from uniform of f(X) given the eavesdropper outcome.

    d = sum_z p^z |P(f(X)=0 | z, u, v) - 1/2|

    Args:
        partition (BoxPartition): A valid partition
        key_map: Map from Alice's output tuple to a bit (default parity)
        u, v: Fixed input vectors (single bits for one pair)
        validate (bool): Validate the partition first

    Returns:
        The distance, exact for rational partitions
    """
    n = partition.marginal.n_pairs
    u, v = _as_inputs(u, n), _as_inputs(v, n)
    if validate:
        report = validate_partition(partition.marginal, partition)
        if not report.valid:
            raise PreconditionError(f"invalid partition: {report.message} ({report.location})")
    arithmetic = partition.arithmetic
    half = coerce(Fraction(1, 2), arithmetic)
    distance = coerce(0, arithmetic)
    for element in partition.elements:
        weight = coerce(element.weight, arithmetic)
        if weight == 0:
            continue
        q0 = coerce(key_zero_probability(element.box, key_map, u, v), arithmetic)
        distance += weight * abs(q0 - half)
    return distance


def attack_report(partition: BoxPartition, key_map: KeyMap = xor_key, u=0, v=0) -> AttackReport:
    n = partition.marginal.n_pairs
    u, v = _as_inputs(u, n), _as_inputs(v, n)
    distance = distance_from_uniform(partition, key_map, u, v)
    return AttackReport(distance=distance, partition=partition, u=u, v=v,
                        key_map=getattr(key_map, '__name__', 'custom'))


def _mix(elements: Sequence[PartitionElement], fallback: ConditionalBox, arithmetic: str):
    weight = sum((coerce(e.weight, arithmetic) for e in elements), coerce(0, arithmetic))
    if weight == 0:
        return weight, fallback
    probs = [coerce(0, arithmetic)] * len(fallback.probs)
    for e in elements:
        w = coerce(e.weight, arithmetic)
        probs = [acc + w * coerce(p, arithmetic) for acc, p in zip(probs, e.box.probs)]
    box = ConditionalBox(fallback.n_pairs, tuple(p / weight for p in probs), arithmetic)
    return weight, box


def binary_reduce(partition: BoxPartition, key_map: KeyMap = xor_key, u=0, v=0) -> BoxPartition:
    """
    Merge elements into two outcomes with the same distance from uniform.

    Elements with P(f=0|z) > 1/2 form outcome "0", all others (ties
    included) outcome "1". An empty outcome keeps weight 0 and the marginal
    as its box.
    """
    n = partition.marginal.n_pairs
    u, v = _as_inputs(u, n), _as_inputs(v, n)
    arithmetic = partition.arithmetic
    half = coerce(Fraction(1, 2), arithmetic)
    buckets: Dict[str, List[PartitionElement]] = {"0": [], "1": []}
    for element in partition.elements:
        q0 = coerce(key_zero_probability(element.box, key_map, u, v), arithmetic)
        buckets["0" if q0 > half else "1"].append(element)
    elements = []
    for label in ("0", "1"):
        weight, box = _mix(buckets[label], partition.marginal, arithmetic)
        elements.append(PartitionElement(weight, box, label))
    return BoxPartition(partition.marginal, tuple(elements))


def element_partition(marginal: ConditionalBox, weight: Number, box: ConditionalBox) -> BoxPartition:
    """Complete a single element (p, P^{Z=0}) to the partition {(p, P^0), (1-p, P^1)}."""
    arithmetic = FLOAT if FLOAT in (marginal.arithmetic, box.arithmetic) or isinstance(weight, float) \
        else RATIONAL
    p = coerce(weight, arithmetic)
    rest = 1 - p
    if rest == 0:
        other = marginal
    else:
        other = ConditionalBox(marginal.n_pairs,
                               tuple((coerce(m, arithmetic) - p * coerce(b, arithmetic)) / rest
                                     for m, b in zip(marginal.probs, box.probs)),
                               arithmetic)
    return BoxPartition(marginal, (PartitionElement(p, box, "0"), PartitionElement(rest, other, "1")))


# ----------------------------------------------------------------------
# Single-box attack
# ----------------------------------------------------------------------

def erasure_strategy(x: int, y: int, u: int, v: int) -> Tuple[int, int, int, int]:
    """
    The deterministic strategy that violates CHSH only at input (u, v),
    where it outputs (x, y).
    """
    x_strategy = [0, 0]
    y_strategy = [0, 0]
    x_strategy[u], y_strategy[v] = x, y
    x_strategy[1 - u] = y ^ ((1 - u) & v)
    y_strategy[1 - v] = x ^ (u & (1 - v))
    return x_strategy[0], x_strategy[1], y_strategy[0], y_strategy[1]


def strategy_label(strategy: Tuple[int, int, int, int]) -> str:
    x0, x1, y0, y1 = strategy
    return f"det[x={x0}{x1},y={y0}{y1}]"


def _require_isotropic(box: ConditionalBox) -> Number:
    if box.n_pairs != 1:
        raise DimensionError(f"single_box_attack needs a 1-pair box, got {box.n_pairs} pairs")
    epsilon = chsh_error(box)
    reference = make_isotropic_box(epsilon) if 0 <= epsilon <= 1 else None
    if box.arithmetic == RATIONAL:
        uneven = reference is None or reference.probs != box.probs
    else:
        uneven = reference is None or not box.allclose(reference, atol=FLOAT_TOLERANCE)
    if uneven:
        raise PreconditionError("box must be unbiased with the same CHSH error on every input")
    return epsilon


def single_box_attack(box: ConditionalBox) -> BoxPartition:
    """
    Optimal partition of an unbiased 1-pair box with CHSH error epsilon.

    Eight deterministic strategies, one per CHSH-violating cell and weighted
    by that cell, plus the PR box with weight 1 - 4*epsilon. Given the
    inputs, a deterministic outcome reveals Alice's bit and the PR outcome
    reveals nothing, so the distance for Alice's bit is 2*epsilon.

    Raises:
        PreconditionError: box is biased or has uneven errors
        DomainError: epsilon > 1/4
    """
    epsilon = _require_isotropic(box)
    if epsilon > Fraction(1, 4) + (FLOAT_TOLERANCE if box.arithmetic == FLOAT else 0):
        raise DomainError("epsilon exceeds 1/4: box is local")
    arithmetic = box.arithmetic
    elements = []
    for name, x, y, u, v in ERASURE_CELLS:
        weight = box.entry(x, y, u, v)
        if weight == 0:
            continue
        strategy = erasure_strategy(x, y, u, v)
        det = make_deterministic_box(*strategy).with_arithmetic(arithmetic)
        elements.append(PartitionElement(weight, det, f"{name}:{strategy_label(strategy)}"))
    pr_weight = 1 - 4 * epsilon
    if arithmetic == FLOAT:
        pr_weight = max(pr_weight, 0.0)
    elements.append(PartitionElement(pr_weight, make_pr_box().with_arithmetic(arithmetic), PR_LABEL))
    logger.debug("Single-box attack: epsilon=%s, %d elements", epsilon, len(elements))
    return BoxPartition(box, tuple(elements))


def _product(partitions: Sequence[BoxPartition], marginal: ConditionalBox) -> BoxPartition:
    elements = []
    for combo in itertools.product(*(p.elements for p in partitions)):
        weight = combo[0].weight
        for e in combo[1:]:
            weight = weight * e.weight
        box = tensor_boxes([e.box for e in combo])
        elements.append(PartitionElement(weight, box, ",".join(e.label for e in combo)))
    return BoxPartition(marginal, tuple(elements))


def product_attack(boxes: Sequence[ConditionalBox]) -> BoxPartition:
    """
    Attack each box independently and take the product partition.

    For the parity of all Alice bits the distance is 1/2 * prod(4 eps_i).
    """
    if not boxes:
        raise DomainError("product_attack needs at least one box")
    partitions = [single_box_attack(b) for b in boxes]
    return _product(partitions, tensor_boxes(list(boxes)))


# ----------------------------------------------------------------------
# Local boxes and the collective attack
# ----------------------------------------------------------------------

def flip_alice(strategy: Tuple[int, int, int, int]) -> Tuple[int, int, int, int]:
    x0, x1, y0, y1 = strategy
    return x0 ^ 1, x1 ^ 1, y0, y1


def deterministic_decomposition(epsilon: Number) -> List[Tuple[Number, Tuple[int, int, int, int]]]:
    """
    Isotropic box with 1/4 <= epsilon <= 3/4 as a mix of deterministic strategies.

    Weight t = 2(3/4 - epsilon) goes to the eight one-violation strategies
    (the fully decomposed epsilon = 1/4 box) and 1 - t to their images with
    Alice's output flipped, which violate CHSH on three inputs.
    """
    epsilon = to_exact(epsilon) if not isinstance(epsilon, float) else epsilon
    if not Fraction(1, 4) <= epsilon <= Fraction(3, 4):
        raise DomainError(f"epsilon = {epsilon} is not in [1/4, 3/4]: box is not local")
    t = 2 * (Fraction(3, 4) - epsilon)
    weights = []
    for _, x, y, u, v in ERASURE_CELLS:
        strategy = erasure_strategy(x, y, u, v)
        if t:
            weights.append((t / 8, strategy))
        if 1 - t:
            weights.append(((1 - t) / 8, flip_alice(strategy)))
    return weights


def _local_leaves(epsilon: Fraction) -> List[PartitionElement]:
    return [PartitionElement(w, make_deterministic_box(*s), strategy_label(s))
            for w, s in deterministic_decomposition(epsilon)]


def collective_weights(epsilon: Number, n: int) -> Dict[Tuple[str, ...], Fraction]:
    """
    Weights of the collective attack indexed by the outcome pattern.

    Each position of a pattern is "l" (the box becomes local) or "PR".
    With a = 4 eps/3: i >= 2 local positions weigh a^i (1-a)^(n-i), a
    single local position weighs 4 eps (1-a)^(n-1), and the all-PR pattern
    takes the rest, (1-a)^(n-1) (1 - a - 2na).

    Raises:
        DomainError: a weight would be negative (epsilon > 3/(8n+4))
    """
    if n < 1:
        raise DomainError("collective attack needs n >= 1")
    eps = to_exact(epsilon)
    if not 0 <= eps <= Fraction(1, 4):
        raise DomainError(f"epsilon = {epsilon} outside [0, 1/4]")
    a = Fraction(4, 3) * eps
    weights: Dict[Tuple[str, ...], Fraction] = {}
    for pattern in itertools.product(("l", PR_LABEL), repeat=n):
        local = pattern.count("l")
        if local >= 2:
            weights[pattern] = a ** local * (1 - a) ** (n - local)
        elif local == 1:
            weights[pattern] = 4 * eps * (1 - a) ** (n - 1)
    remainder = (1 - a) ** (n - 1) * (1 - a - 2 * n * a)
    if remainder < 0:
        raise DomainError(
            f"negative weight {remainder} for the all-PR outcome: epsilon {eps} exceeds "
            f"3/(8n+4) = {collective_threshold(n)}")
    weights[(PR_LABEL,) * n] = remainder
    return weights


def collective_threshold(n: int) -> Fraction:
    """Smallest epsilon at which the all-PR outcome has weight 0."""
    return Fraction(3, 8 * n + 4)


def collective_attack(epsilon: Number, n: int, expand: bool = True) -> BoxPartition:
    """
    Collective partition of n isotropic boxes.

    Positions marked local carry an isotropic box with error 1/4 (when it is
    the only local position) or 3/4 (otherwise); the remaining positions
    carry PR boxes. With expand=True every local box is split further into
    its deterministic strategies, so labels show exactly which bits are known.

    Example:
        partition = collective_attack(Fraction(3, 20), 2)
        at_least_one_local(partition)   # Fraction(1, 1)
    """
    exact = to_exact(epsilon)
    weights = collective_weights(exact, n)
    marginal = tensor_boxes([make_isotropic_box(exact)] * n)
    quarter, three_quarters = Fraction(1, 4), Fraction(3, 4)
    pr = PartitionElement(Fraction(1), make_pr_box(), PR_LABEL)
    all_pr = (PR_LABEL,) * n

    elements = []
    for pattern, weight in weights.items():
        if weight == 0 and pattern != all_pr:
            continue
        local_error = quarter if pattern.count("l") == 1 else three_quarters
        factors = []
        for symbol in pattern:
            if symbol == PR_LABEL:
                factors.append([pr])
            elif expand:
                factors.append(_local_leaves(local_error))
            else:
                factors.append([PartitionElement(Fraction(1), make_isotropic_box(local_error),
                                                 f"L{local_error}")])
        for combo in itertools.product(*factors):
            w = weight
            for e in combo:
                w *= e.weight
            box = tensor_boxes([e.box for e in combo])
            elements.append(PartitionElement(w, box, ",".join(e.label for e in combo)))
    logger.info("Collective attack: epsilon=%s, n=%d, %d elements", exact, n, len(elements))
    return BoxPartition(marginal, tuple(elements))


def at_least_one_local(partition: BoxPartition) -> Number:
    """Total weight of outcomes in which at least one box is fully local."""
    return sum((e.weight for e in partition.elements
                if any(part != PR_LABEL for part in e.label.split(","))), Fraction(0))


def known_fraction(epsilon: Number) -> Fraction:
    """
    Fraction of bits the collective attack reveals with certainty.

    Returns 1/n for the smallest n with epsilon >= 3/(8n+4); attacking
    blocks of that size leaves every block with at least one known bit.
    """
    eps = Fraction(repr(epsilon)) if isinstance(epsilon, float) else to_exact(epsilon)
    if eps == 0:
        return Fraction(0)
    if not 0 < eps <= Fraction(1, 4):
        raise DomainError(f"epsilon = {epsilon} outside (0, 1/4]")
    n = max(1, math.ceil((3 / eps - 4) / 8))
    return Fraction(1, n)


def knowledge_probabilities(epsilon: Number, n: int) -> Dict[str, Fraction]:
    """
    Probability that at least one of n boxes is fully known to the attacker.

    "individual" attacks each box on its own, 1 - (1 - 4 eps)^n;
    "collective" uses the collective partition.
    """
    eps = to_exact(epsilon)
    weights = collective_weights(eps, n)
    return {
        'individual': 1 - (1 - 4 * eps) ** n,
        'collective': 1 - weights[(PR_LABEL,) * n],
    }
