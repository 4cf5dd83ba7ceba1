"""
Protocol Module - Key Agreement Simulation

This module simulates key agreement from CHSH-violating boxes end to end:
- Key rate, feasibility threshold and the (delta, epsilon) region table
- Seeded sampling of measurement rounds and parameter estimation
- Syndrome-based information reconciliation with minimum-distance decoding
- Privacy amplification by a random GF(2) matrix and the key security bound
- run_protocol, which ties the steps together into a reproducible transcript

Random draws come from a single numpy Generator (PCG64) seeded from the
config, consumed in this order: round inputs u, round inputs v, outcome
uniforms (repeated per sifting batch), raw-key selection, test-round
selection, then the (m + s) x n hashing matrix.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .boxcore import (ConditionalBox, apply_output_noise, chsh_error, depolarize, make_isotropic_box,
                      make_quantum_box, make_singlet_box)
from .errors import DimensionError, DomainError

logger = logging.getLogger(__name__)

SINGLET_ANGLES = (90.0, 60.0, 0.0, 30.0)
DEFAULT_SLACK = 0.02
MAX_DECODE_LENGTH = 24
REGION_COLUMNS = ["delta", "epsilon", "rate", "feasible", "epsilon_max"]


# ----------------------------------------------------------------------
# Rates and bounds
# ----------------------------------------------------------------------

def binary_entropy(p: float) -> float:
    """h(p) in bits, with h(0) = h(1) = 0."""
    p = float(p)
    if not 0 <= p <= 1:
        raise DomainError(f"binary entropy needs a probability, got {p}")
    if p == 0 or p == 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def key_rate(epsilon: float, delta: float) -> float:
    """
    Asymptotic key bits per box, q = 1 - h(delta) - log2(1 + 4 epsilon).

    Example:
        key_rate(3/16, 0)   # 0.19264507...
    """
    epsilon = float(epsilon)
    if not 0 <= epsilon <= 1:
        raise DomainError(f"epsilon = {epsilon} is not a probability")
    return 1.0 - binary_entropy(delta) - math.log2(1 + 4 * epsilon)


def epsilon_max(delta: float) -> float:
    """Largest CHSH error with a positive key rate: 2^(-h(delta)-1) - 1/4."""
    return 2.0 ** (-binary_entropy(delta) - 1) - 0.25


@dataclass
class KeyRateReport:
    """Rate and feasibility of one (epsilon, delta) point."""
    epsilon: float
    delta: float
    rate: float
    feasible: bool
    epsilon_max: float

    def to_dict(self) -> Dict[str, Any]:
        return {'delta': self.delta, 'epsilon': self.epsilon, 'rate': self.rate,
                'feasible': self.feasible, 'epsilon_max': self.epsilon_max}


def key_rate_report(epsilon: float, delta: float) -> KeyRateReport:
    rate = key_rate(epsilon, delta)
    return KeyRateReport(epsilon=float(epsilon), delta=float(delta), rate=rate,
                         feasible=rate > 0, epsilon_max=epsilon_max(delta))


def region_table(deltas: Sequence[float], epsilons: Sequence[float]) -> pd.DataFrame:
    """
    Key rate over a (delta, epsilon) grid.

    Returns:
        pd.DataFrame: columns delta, epsilon, rate, feasible, epsilon_max;
        one row per grid point, delta-major
    """
    for d in deltas:
        if not 0 <= float(d) <= 0.5:
            raise DomainError(f"delta grid value {d} outside [0, 1/2]")
    for e in epsilons:
        if not 0 <= float(e) <= 0.25:
            raise DomainError(f"epsilon grid value {e} outside [0, 1/4]")
    rows = [key_rate_report(e, d).to_dict() for d in deltas for e in epsilons]
    return pd.DataFrame(rows, columns=REGION_COLUMNS)


def quantum_curve(flip_probabilities: Sequence[float]) -> pd.DataFrame:
    """
    (delta, epsilon) reached by the ideal singlet box when every output is
    flipped independently with probability p.
    """
    ideal = make_singlet_box(*SINGLET_ANGLES)
    rows = []
    for p in flip_probabilities:
        noisy = apply_output_noise(ideal, float(p))
        delta = noisy.entry(0, 1, 0, 0) + noisy.entry(1, 0, 0, 0)
        rows.append({'p_noise': float(p), 'delta': float(delta), 'epsilon': float(chsh_error(noisy))})
    return pd.DataFrame(rows, columns=['p_noise', 'delta', 'epsilon'])


def key_distance_bound(s: int, m: int, n: int, epsilon) -> float:
    """
    Distance of an s-bit key from uniform, given m syndrome bits:
    1/2 * 2^(s+m) * ((1 + 4 epsilon)/2)^n.
    """
    if min(s, m, n) < 0:
        raise DomainError("bit counts must be nonnegative")
    if not 0 <= epsilon <= 0.25:
        raise DomainError(f"epsilon = {epsilon} outside [0, 1/4]")
    if isinstance(epsilon, float):
        return 0.5 * 2.0 ** (s + m) * ((1 + 4 * epsilon) / 2) ** n
    return Fraction(1, 2) * 2 ** (s + m) * ((1 + 4 * Fraction(epsilon)) / 2) ** n


def bit_distance_bound(i: int, n: int, epsilon) -> float:
    """Bound on the i-th hashed bit given the previous ones: 1/2 * 2^i * ((1+4eps)/2)^n."""
    return key_distance_bound(i, 0, n, epsilon)


def sampling_bound(k: int, slack: float) -> float:
    """Probability that k test rounds misestimate the error by more than slack."""
    return 2.0 * math.exp(-k * slack ** 2 / 16)


def required_test_size(slack: float, failure: float) -> int:
    """Smallest k with sampling_bound(k, slack) <= failure."""
    if not 0 < failure < 2 or slack <= 0:
        raise DomainError("need slack > 0 and 0 < failure < 2")
    return math.ceil(16 * math.log(2 / failure) / slack ** 2)


# ----------------------------------------------------------------------
# Rounds and estimation
# ----------------------------------------------------------------------

@dataclass
class Rounds:
    """Per-round inputs and outputs as uint8 arrays."""
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.u)

    def select(self, indices) -> 'Rounds':
        return Rounds(self.u[indices], self.v[indices], self.x[indices], self.y[indices])

    @staticmethod
    def concat(parts: Sequence['Rounds']) -> 'Rounds':
        return Rounds(*(np.concatenate([getattr(p, name) for p in parts]) for name in 'uvxy'))


def _outcome_table(box: ConditionalBox) -> np.ndarray:
    """Cumulative outcome probabilities per input index 2u+v over (x, y) = 00, 01, 10, 11."""
    table = np.zeros((4, 4))
    for u, v in itertools.product((0, 1), repeat=2):
        for x, y in itertools.product((0, 1), repeat=2):
            table[2 * u + v, 2 * x + y] = float(box.entry(x, y, u, v))
    return np.cumsum(table, axis=1)


def sample_rounds(box: ConditionalBox, rounds: int, rng: np.random.Generator) -> Rounds:
    """
    Measure `rounds` copies of a 1-pair box with uniform random inputs.

    Draws u, then v, then one uniform per round that picks the outcome
    from the conditional distribution.
    """
    if box.n_pairs != 1:
        raise DimensionError("sample_rounds needs a 1-pair box")
    u = rng.integers(0, 2, size=rounds, dtype=np.uint8)
    v = rng.integers(0, 2, size=rounds, dtype=np.uint8)
    r = rng.random(rounds)
    cumulative = _outcome_table(box)[2 * u.astype(int) + v]
    outcome = (r[:, None] >= cumulative[:, :3]).sum(axis=1)
    return Rounds(u, v, (outcome >> 1).astype(np.uint8), (outcome & 1).astype(np.uint8))


@dataclass
class ParameterEstimate:
    epsilon_hat: float
    delta_hat: Optional[float]
    confidence: float
    k: int

    @property
    def delta_defined(self) -> bool:
        return self.delta_hat is not None


def estimate_parameters(test_rounds: Rounds, slack: float = DEFAULT_SLACK) -> ParameterEstimate:
    """
    CHSH error and (0,0)-input disagreement observed on the test rounds.

    confidence = 2 exp(-k slack^2 / 16) bounds the probability that the
    estimate is off by more than slack. delta_hat is None when no test round
    used inputs (0, 0).
    """
    k = len(test_rounds)
    if k < 1:
        raise DomainError("estimate_parameters needs at least one test round")
    violated = (test_rounds.x ^ test_rounds.y) != (test_rounds.u & test_rounds.v)
    key_inputs = (test_rounds.u == 0) & (test_rounds.v == 0)
    delta_hat = None
    if key_inputs.any():
        delta_hat = float(np.mean(test_rounds.x[key_inputs] != test_rounds.y[key_inputs]))
    else:
        logger.warning("No (0,0) rounds among %d test rounds: delta undefined", k)
    return ParameterEstimate(epsilon_hat=float(np.mean(violated)), delta_hat=delta_hat,
                             confidence=sampling_bound(k, slack), k=k)


# ----------------------------------------------------------------------
# Reconciliation and amplification
# ----------------------------------------------------------------------

def _bits(vector) -> np.ndarray:
    return np.asarray(vector, dtype=np.uint8) & 1


def syndrome(matrix, x) -> np.ndarray:
    """A x over GF(2)."""
    x = _bits(x)
    matrix = np.asarray(matrix, dtype=np.int64).reshape(-1, len(x))
    return (matrix @ x.astype(np.int64) % 2).astype(np.uint8)


def reconcile(x, y, syndrome_rows) -> np.ndarray:
    """
    Bob's correction of y given the syndrome of Alice's x.

    Returns the string y' closest to y in Hamming distance among those with
    the same syndrome as x, ties broken by the lexicographically smallest y'.
    Candidates are searched in order of distance from y, which visits the
    same set an exhaustive scan over all 2^n strings would rank first.
    """
    x, y = _bits(x), _bits(y)
    n = len(x)
    if len(y) != n:
        raise DimensionError("x and y must have the same length")
    if n > MAX_DECODE_LENGTH:
        raise DomainError(f"decoding is limited to n <= {MAX_DECODE_LENGTH}")
    matrix = np.asarray(syndrome_rows, dtype=np.int64).reshape(-1, n)
    if matrix.shape[0] > n:
        raise DimensionError("more syndrome rows than key bits")
    target = syndrome(matrix, x) ^ syndrome(matrix, y)
    target_code = int(sum(int(b) << i for i, b in enumerate(target)))
    columns = [int(sum(int(matrix[r, j]) << r for r in range(matrix.shape[0]))) for j in range(n)]

    for weight in range(n + 1):
        best = None
        for flips in itertools.combinations(range(n), weight):
            code = 0
            for j in flips:
                code ^= columns[j]
            if code != target_code:
                continue
            candidate = y.copy()
            candidate[list(flips)] ^= 1
            if best is None or tuple(candidate) < tuple(best):
                best = candidate
        if best is not None:
            logger.debug("Reconciled at distance %d", weight)
            return best
    raise DomainError("no string matches the syndrome")


def privacy_amplify(x, matrix) -> np.ndarray:
    """
    Key bits as parities of selected positions of x: S = A x over GF(2).

    Example:
        privacy_amplify([1, 0, 1], [[1, 1, 0], [0, 1, 1]])   # array([1, 1])
    """
    x = _bits(x)
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.size == 0:
        return np.zeros(len(matrix), dtype=np.uint8)
    if matrix.ndim != 2 or matrix.shape[1] != len(x):
        raise DimensionError(f"matrix shape {matrix.shape} does not fit a {len(x)}-bit string")
    return (matrix @ x.astype(np.int64) % 2).astype(np.uint8)


def reconciliation_success_rate(n: int, delta: float, m: int, trials: int,
                                rng: np.random.Generator) -> float:
    """
    Fraction of trials where Bob recovers x exactly: each trial draws x,
    flips each bit with probability delta, and draws a fresh m x n matrix.
    """
    successes = 0
    for _ in range(trials):
        x = rng.integers(0, 2, size=n, dtype=np.uint8)
        y = x ^ (rng.random(n) < delta).astype(np.uint8)
        matrix = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
        successes += bool(np.array_equal(reconcile(x, y, matrix), x))
    return successes / trials if trials else 0.0


# ----------------------------------------------------------------------
# Configuration and transcript
# ----------------------------------------------------------------------

SOURCE_KINDS = ("quantum", "singlet", "isotropic")
AUTO_KEY_LENGTH = "auto"


@dataclass
class ProtocolConfig:
    """
    Parameters of one protocol run.

    Attributes:
        n (int): Raw key length
        k (int): Number of test rounds
        source (dict): {"kind": "quantum", "delta", "noise"},
            {"kind": "singlet", "angles": [a0, a1, b0, b1], "flip"} or
            {"kind": "isotropic", "epsilon"}
        s (int or None): Key length; None or "auto" derives it from the key rate
        seed (int): Generator seed
        slack (float): Margin added to the estimated CHSH error
        delta_slack (float): Margin added to the estimated disagreement
        balance_window (tuple): Accepted fraction of ones in the test outputs
        depolarize (bool): Sample from the depolarized source box
    """
    n: int
    k: int
    source: Dict[str, Any] = field(default_factory=lambda: {"kind": "quantum", "delta": 0.0, "noise": 0.0})
    s: Optional[Union[int, str]] = None
    seed: int = 0
    slack: float = DEFAULT_SLACK
    delta_slack: float = 0.0
    balance_window: Tuple[float, float] = (0.4, 0.6)
    depolarize: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if self.k < 0:
            raise DomainError("k must be nonnegative")
        if self.s == AUTO_KEY_LENGTH:
            self.s = None
        if self.s is not None and (not isinstance(self.s, int) or self.s < 0):
            raise DomainError(f"s must be a nonnegative integer or \"{AUTO_KEY_LENGTH}\", got {self.s!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        for name in ("slack", "delta_slack"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must be in [0, 1]")
        self.balance_window = tuple(self.balance_window)
        low, high = self.balance_window
        if not 0 <= low <= high <= 1:
            raise DomainError(f"invalid balance window {self.balance_window}")
        if self.source.get("kind") not in SOURCE_KINDS:
            raise DomainError(f"source kind must be one of {SOURCE_KINDS}")
        self.source_box()

    def source_box(self) -> ConditionalBox:
        source = self.source
        kind = source["kind"]
        if kind == "quantum":
            box = make_quantum_box(float(source.get("delta", 0.0)), float(source.get("noise", 0.0)))
        elif kind == "singlet":
            angles = source.get("angles", SINGLET_ANGLES)
            if len(angles) != 4:
                raise DomainError("a singlet source needs four angles")
            box = apply_output_noise(make_singlet_box(*angles), float(source.get("flip", 0.0)))
        else:
            box = make_isotropic_box(float(source["epsilon"]))
        return depolarize(box) if self.depolarize else box

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'k': self.k,
            'source': dict(self.source),
            's': AUTO_KEY_LENGTH if self.s is None else self.s,
            'seed': self.seed,
            'slack': self.slack,
            'delta_slack': self.delta_slack,
            'balance_window': list(self.balance_window),
            'depolarize': self.depolarize,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ProtocolConfig':
        known = {'n', 'k', 'source', 's', 'seed', 'slack', 'delta_slack', 'balance_window', 'depolarize'}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class Transcript:
    """Full record of one protocol run."""
    config: Dict[str, Any]
    u: List[int]
    v: List[int]
    x: List[int]
    y: List[int]
    raw_key_indices: List[int] = field(default_factory=list)
    test_indices: List[int] = field(default_factory=list)
    epsilon_hat: Optional[float] = None
    delta_hat: Optional[float] = None
    confidence: Optional[float] = None
    aborted: bool = False
    abort_reason: Optional[str] = None
    m: int = 0
    s: int = 0
    syndrome_rows: List[List[int]] = field(default_factory=list)
    syndrome: List[int] = field(default_factory=list)
    amplification: List[List[int]] = field(default_factory=list)
    key_alice: List[int] = field(default_factory=list)
    key_bob: List[int] = field(default_factory=list)
    bound: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Transcript':
        return cls(**data)


def _abort(transcript: Transcript, reason: str) -> Transcript:
    transcript.aborted = True
    transcript.abort_reason = reason
    logger.info("Protocol aborted: %s", reason)
    return transcript


def _sift(box: ConditionalBox, config: ProtocolConfig, rng: np.random.Generator) -> Tuple[Rounds, bool]:
    batch = config.n + config.k
    cap = 16 * batch
    parts = [sample_rounds(box, batch, rng)]
    drawn = batch
    sifted = int(np.sum((parts[0].u == 0) & (parts[0].v == 0)))
    while sifted < config.n:
        if drawn + batch > cap:
            return Rounds.concat(parts), False
        part = sample_rounds(box, batch, rng)
        parts.append(part)
        drawn += batch
        sifted += int(np.sum((part.u == 0) & (part.v == 0)))
        logger.debug("Sifting: %d rounds drawn, %d usable for the raw key", drawn, sifted)
    return Rounds.concat(parts), True


def run_protocol(config: ProtocolConfig, rng: Optional[np.random.Generator] = None) -> Transcript:
    """
    Run key agreement once and record everything that happened.

    Steps: measure rounds until n rounds with inputs (0, 0) exist; pick n of
    them for the raw key and k of the rest for testing; estimate the CHSH
    error and the disagreement; abort on unbalanced outputs or parameters
    without a positive key rate; hash the raw key with a random
    (m + s) x n matrix, send the first m bits as syndrome, let Bob decode,
    and keep the last s bits as the key.

    Args:
        config (ProtocolConfig): Run parameters
        rng: Generator to use; defaults to PCG64 seeded with config.seed

    Returns:
        Transcript: The complete run record
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    box = config.source_box()
    rounds, enough = _sift(box, config, rng)
    transcript = Transcript(config=config.to_dict(), u=rounds.u.tolist(), v=rounds.v.tolist(),
                            x=rounds.x.tolist(), y=rounds.y.tolist())
    if not enough:
        return _abort(transcript, "insufficient sift")

    key_candidates = np.flatnonzero((rounds.u == 0) & (rounds.v == 0))
    raw = np.sort(rng.choice(key_candidates, size=config.n, replace=False))
    rest = np.setdiff1d(np.arange(len(rounds)), raw)
    test = np.sort(rng.choice(rest, size=config.k, replace=False)) if config.k else np.array([], dtype=int)
    transcript.raw_key_indices = raw.tolist()
    transcript.test_indices = test.tolist()

    if config.k == 0:
        return _abort(transcript, "empty test sample")
    sample = rounds.select(test)
    estimate = estimate_parameters(sample, config.slack)
    transcript.epsilon_hat = estimate.epsilon_hat
    transcript.delta_hat = estimate.delta_hat
    transcript.confidence = estimate.confidence
    if not estimate.delta_defined:
        return _abort(transcript, "no (0,0) test rounds")

    low, high = config.balance_window
    for party, outputs in (("Alice", sample.x), ("Bob", sample.y)):
        ones = float(np.mean(outputs))
        if not low <= ones <= high:
            return _abort(transcript, f"unbalanced outputs ({party}: {ones:.3f} ones)")

    eps = min(1.0, estimate.epsilon_hat + config.slack)
    delta = min(1.0, estimate.delta_hat + config.delta_slack)
    rate = key_rate(eps, delta)
    if rate <= 0:
        return _abort(transcript, "outside feasible region")

    n = config.n
    m = math.ceil(n * binary_entropy(delta))
    s = config.s if config.s is not None else max(0, math.floor(n * rate))
    matrix = rng.integers(0, 2, size=(m + s, n), dtype=np.uint8)
    x_raw, y_raw = rounds.x[raw], rounds.y[raw]
    check_rows, key_rows = matrix[:m], matrix[m:]
    corrected = reconcile(x_raw, y_raw, check_rows) if m else y_raw

    transcript.m, transcript.s = m, s
    transcript.syndrome_rows = check_rows.tolist()
    transcript.syndrome = syndrome(check_rows, x_raw).tolist() if m else []
    transcript.amplification = key_rows.tolist()
    transcript.key_alice = privacy_amplify(x_raw, key_rows).tolist() if s else []
    transcript.key_bob = privacy_amplify(corrected, key_rows).tolist() if s else []
    transcript.bound = key_distance_bound(s, m, n, eps)
    logger.info("Protocol finished: n=%d, m=%d, s=%d, bound=%.3g", n, m, s, transcript.bound)
    return transcript
