"""Tests for key rates, estimation, reconciliation and the protocol run."""

import math
from fractions import Fraction

import numpy as np
import pytest

from nskd.boxcore import make_isotropic_box, make_quantum_box, tensor_boxes
from nskd.errors import DimensionError, DomainError
from nskd.protocol import (ProtocolConfig, Rounds, binary_entropy, bit_distance_bound, epsilon_max,
                           estimate_parameters, key_distance_bound, key_rate, privacy_amplify,
                           quantum_curve, reconcile, reconciliation_success_rate, region_table,
                           required_test_size, run_protocol, sample_rounds, sampling_bound)
from nskd.serialization import dumps, transcript_from_dict

HAMMING_CHECK = np.array([[(j >> r) & 1 for j in range(1, 8)] for r in range(3)], dtype=np.uint8)


def noiseless_config(seed: int, k: int = 2048) -> ProtocolConfig:
    return ProtocolConfig(n=16, k=k, seed=seed, source={"kind": "quantum", "delta": 0.0, "noise": 0.0})


# ----------------------------------------------------------------------
# Rates and bounds
# ----------------------------------------------------------------------

def test_binary_entropy():
    assert binary_entropy(0) == 0
    assert binary_entropy(1) == 0
    assert binary_entropy(0.5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        binary_entropy(1.5)


@pytest.mark.parametrize("eps, delta, expected", [
    (3 / 16, 0.0, 0.192645),
    (0.2, 0.02, 0.010562),
    (0.25, 0.0, 0.0),
])
def test_key_rate_values(eps, delta, expected):
    assert key_rate(eps, delta) == pytest.approx(expected, abs=1e-5)


def test_epsilon_max_values():
    assert epsilon_max(0) == pytest.approx(0.25, abs=1e-12)
    assert epsilon_max(0.02) == pytest.approx(0.203307, abs=1e-5)
    assert epsilon_max(0.5) == pytest.approx(0.0, abs=1e-12)


def test_region_table_feasibility_matches_threshold():
    table = region_table(np.linspace(0, 0.5, 100), np.linspace(0, 0.25, 100))
    assert list(table.columns) == ["delta", "epsilon", "rate", "feasible", "epsilon_max"]
    assert len(table) == 10000
    assert (table["feasible"] == (table["rate"] > 0)).all()
    assert (table["feasible"] == (table["epsilon"] < table["epsilon_max"])).all()


def test_region_table_rejects_out_of_range_grid():
    with pytest.raises(DomainError):
        region_table([0.6], [0.1])
    with pytest.raises(DomainError):
        region_table([0.1], [0.3])


def test_quantum_curve():
    curve = quantum_curve([0.0, 0.05, 0.1])
    assert list(curve.columns) == ["p_noise", "delta", "epsilon"]
    assert curve["epsilon"][0] == pytest.approx(3 / 16)
    for p, delta in zip(curve["p_noise"], curve["delta"]):
        assert delta == pytest.approx(2 * p * (1 - p))
    assert curve["epsilon"].is_monotonic_increasing


def test_key_distance_bound_exact():
    assert key_distance_bound(2, 1, 4, Fraction(1, 8)) == Fraction(81, 64)
    assert key_distance_bound(0, 0, 0, 0.1) == pytest.approx(0.5)
    assert bit_distance_bound(3, 10, Fraction(1, 4)) == 4


def test_key_distance_bound_decreases_below_rate():
    eps, delta = 0.15, 0.01
    rate = key_rate(eps, delta)
    bounds = []
    for n in (50, 100, 200):
        m = math.ceil(n * binary_entropy(delta))
        s = math.floor(n * rate / 2)
        bounds.append(key_distance_bound(s, m, n, eps))
    assert bounds[0] > bounds[1] > bounds[2]
    assert all(b < 0.5 for b in bounds)


def test_key_distance_bound_rejects_bad_arguments():
    with pytest.raises(DomainError):
        key_distance_bound(-1, 0, 4, 0.1)
    with pytest.raises(DomainError):
        key_distance_bound(1, 0, 4, 0.3)


def test_key_distance_bound_is_monotone():
    errors = [Fraction(k, 40) for k in range(11)]
    for eps in errors:
        for n in range(1, 6):
            base = key_distance_bound(1, 1, n, eps)
            assert key_distance_bound(2, 1, n, eps) >= base
            assert key_distance_bound(1, 2, n, eps) >= base
            assert key_distance_bound(1, 1, n + 1, eps) <= base
    for lower, upper in zip(errors, errors[1:]):
        assert key_distance_bound(1, 1, 4, lower) <= key_distance_bound(1, 1, 4, upper)


def test_sampling_bound_value():
    assert sampling_bound(10 ** 4, 0.05) == pytest.approx(2 * math.exp(-1.5625), abs=1e-9)


def test_required_test_size_inverts_sampling_bound():
    k = required_test_size(0.05, 0.01)
    assert sampling_bound(k, 0.05) <= 0.01
    assert sampling_bound(k - 1, 0.05) > 0.01


# ----------------------------------------------------------------------
# Sampling and estimation
# ----------------------------------------------------------------------

def test_sample_rounds_shapes(rng):
    rounds = sample_rounds(make_quantum_box(0, 0), 1000, rng)
    assert len(rounds) == 1000
    assert set(np.unique(rounds.u)) <= {0, 1}
    key = (rounds.u == 0) & (rounds.v == 0)
    assert np.array_equal(rounds.x[key], rounds.y[key])


def test_sample_rounds_needs_one_pair(rng, iso_tenth):
    with pytest.raises(DimensionError):
        sample_rounds(tensor_boxes([iso_tenth, iso_tenth]), 10, rng)


def test_estimate_confidence(rng):
    rounds = sample_rounds(make_quantum_box(0, 0), 10 ** 4, rng)
    estimate = estimate_parameters(rounds, slack=0.05)
    assert estimate.k == 10 ** 4
    assert estimate.confidence == pytest.approx(2 * math.exp(-1.5625), abs=1e-9)
    assert estimate.delta_hat == 0


def test_estimate_concentrates():
    box = make_quantum_box(0, 0)
    close = 0
    for seed in range(100):
        estimate = estimate_parameters(sample_rounds(box, 10 ** 5, np.random.default_rng(seed)))
        close += abs(estimate.epsilon_hat - 0.1875) <= 0.01
    assert close >= 99


def test_estimate_without_key_inputs():
    ones = np.ones(5, dtype=np.uint8)
    rounds = Rounds(u=ones, v=ones, x=ones, y=ones * 0)
    estimate = estimate_parameters(rounds)
    assert estimate.delta_hat is None
    assert estimate.epsilon_hat == 0


# ----------------------------------------------------------------------
# Reconciliation and amplification
# ----------------------------------------------------------------------

def test_reconcile_identical_strings():
    x = np.array([1, 0, 1, 1, 0, 0, 1], dtype=np.uint8)
    assert np.array_equal(reconcile(x, x, HAMMING_CHECK), x)


@pytest.mark.parametrize("position", range(7))
def test_reconcile_corrects_single_error(position):
    x = np.array([1, 0, 1, 1, 0, 0, 1], dtype=np.uint8)
    y = x.copy()
    y[position] ^= 1
    assert np.array_equal(reconcile(x, y, HAMMING_CHECK), x)


def test_reconcile_breaks_ties_lexicographically():
    result = reconcile([1, 0], [0, 0], [[1, 1]])
    assert result.tolist() == [0, 1]


def test_reconcile_without_syndrome_keeps_y():
    y = np.array([1, 1, 0], dtype=np.uint8)
    assert np.array_equal(reconcile([0, 0, 0], y, np.zeros((0, 3))), y)


def test_reconcile_length_limit():
    with pytest.raises(DomainError):
        reconcile(np.zeros(25), np.zeros(25), np.zeros((1, 25)))


def test_reconciliation_success_rate():
    rate = reconciliation_success_rate(16, 0.05, 5, 200, np.random.default_rng(7))
    assert rate >= 0.6


def test_privacy_amplify():
    assert privacy_amplify([1, 0, 1], [[1, 1, 0], [0, 1, 1]]).tolist() == [1, 1]
    with pytest.raises(DimensionError):
        privacy_amplify([1, 0], [[1, 1, 0]])


def test_privacy_amplify_is_linear(rng):
    for n in (1, 5, 16):
        matrix = rng.integers(0, 2, size=(4, n))
        for _ in range(10):
            x = rng.integers(0, 2, size=n)
            y = rng.integers(0, 2, size=n)
            combined = privacy_amplify(x ^ y, matrix)
            assert (combined == privacy_amplify(x, matrix) ^ privacy_amplify(y, matrix)).all()


# ----------------------------------------------------------------------
# Configuration and runs
# ----------------------------------------------------------------------

def test_config_roundtrip():
    config = noiseless_config(3)
    assert ProtocolConfig.from_dict(config.to_dict()) == config


@pytest.mark.parametrize("changes", [
    {"n": 0},
    {"k": -1},
    {"slack": 1.5},
    {"balance_window": (0.7, 0.3)},
    {"source": {"kind": "laser"}},
    {"s": -1},
    {"s": "many"},
])
def test_config_validation(changes):
    data = noiseless_config(0).to_dict()
    data.update(changes)
    with pytest.raises(DomainError):
        ProtocolConfig.from_dict(data)


def test_config_auto_key_length():
    data = noiseless_config(4).to_dict()
    assert data["s"] == "auto"
    config = ProtocolConfig.from_dict(data)
    assert config.s is None
    transcript = run_protocol(config)
    assert not transcript.aborted
    assert transcript.s == math.floor(16 * key_rate(transcript.epsilon_hat + config.slack, 0))
    fixed = ProtocolConfig.from_dict({**data, "s": 2})
    assert run_protocol(fixed).s == 2


def test_config_rejects_unknown_fields():
    data = noiseless_config(0).to_dict()
    data["rounds"] = 5
    with pytest.raises(DomainError):
        ProtocolConfig.from_dict(data)


def test_noiseless_runs_agree():
    for seed in range(100):
        transcript = run_protocol(noiseless_config(seed))
        assert not transcript.aborted, transcript.abort_reason
        assert transcript.m == 0
        assert len(transcript.key_alice) == transcript.s
        assert transcript.key_alice == transcript.key_bob
        assert transcript.bound == pytest.approx(
            key_distance_bound(transcript.s, 0, 16, transcript.epsilon_hat + 0.02))


def test_noiseless_runs_with_fewer_test_rounds():
    aborted = sum(run_protocol(noiseless_config(seed, k=512)).aborted for seed in range(100))
    assert aborted <= 5


def test_runs_are_reproducible():
    first = dumps(run_protocol(noiseless_config(11)).to_dict())
    second = dumps(run_protocol(noiseless_config(11)).to_dict())
    assert first == second


def test_transcript_indices():
    transcript = run_protocol(noiseless_config(5, k=256))
    raw, test = set(transcript.raw_key_indices), set(transcript.test_indices)
    assert len(raw) == 16 and len(test) == 256
    assert not raw & test
    assert all(transcript.u[i] == 0 and transcript.v[i] == 0 for i in raw)


def test_transcript_json_roundtrip():
    transcript = run_protocol(noiseless_config(2, k=256))
    assert transcript_from_dict(transcript.to_dict()) == transcript


def test_local_source_aborts():
    config = ProtocolConfig(n=16, k=512, seed=1, source={"kind": "isotropic", "epsilon": 0.3})
    transcript = run_protocol(config)
    assert transcript.aborted
    assert transcript.abort_reason == "outside feasible region"
    assert transcript.key_alice == []


def test_empty_test_sample_aborts():
    transcript = run_protocol(noiseless_config(0, k=0))
    assert transcript.aborted
    assert transcript.abort_reason == "empty test sample"


def test_balance_window_aborts():
    config = ProtocolConfig(n=16, k=512, seed=4, balance_window=(0.7, 0.9))
    transcript = run_protocol(config)
    assert transcript.aborted
    assert transcript.abort_reason.startswith("unbalanced outputs")


def test_noisy_source_reconciles():
    config = ProtocolConfig(n=16, k=2048, seed=9, slack=0.0,
                            source={"kind": "isotropic", "epsilon": 0.02})
    transcript = run_protocol(config)
    assert not transcript.aborted
    assert transcript.m == math.ceil(16 * binary_entropy(transcript.delta_hat))
    assert len(transcript.syndrome) == transcript.m


def test_depolarized_source():
    config = ProtocolConfig(n=16, k=512, seed=8, depolarize=True,
                            source={"kind": "quantum", "delta": 0.0, "noise": 0.0})
    assert config.source_box().allclose(make_isotropic_box(0.1875))
    # depolarizing spreads the error onto the key inputs as well
    assert run_protocol(config).abort_reason == "outside feasible region"
