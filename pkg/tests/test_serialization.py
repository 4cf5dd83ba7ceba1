"""Tests for JSON codecs, number parsing and atomic file output."""

import json
from fractions import Fraction

import pandas as pd
import pytest

from nskd.boxcore import make_isotropic_box, make_pr_box, make_singlet_box
from nskd.errors import DomainError, NskdError, PreconditionError
from nskd.file_writer import table_to_csv, write_csv_atomic, write_file_atomic
from nskd.lpcert import (build_xor_primal, single_box_certificate, tensor_certificate, verify_certificate,
                         verify_tensor_certificate)
from nskd.partition import distance_from_uniform, single_box_attack
from nskd.protocol import ProtocolConfig
from nskd.rationals import format_rational, format_value, parse_fraction
from nskd.serialization import (box_from_dict, box_to_dict, certificate_from_dict, certificate_to_dict,
                                config_from_dict, config_to_dict, dumps, lp_from_dict, lp_to_dict,
                                partition_from_dict, partition_to_dict, read_json_file, write_json_file)


@pytest.mark.parametrize("text, expected", [
    ("3/20", Fraction(3, 20)),
    ("0.15", Fraction(3, 20)),
    ("2", Fraction(2)),
    (" 1/4 ", Fraction(1, 4)),
    ("1e2", Fraction(100)),
    ("2.5e-3", Fraction(1, 400)),
])
def test_parse_fraction(text, expected):
    assert parse_fraction(text) == expected


@pytest.mark.parametrize("text", ["abc", "1/0", "1/2/3", "", "inf", "Infinity", "-inf", "nan",
                                  "1e999999999", "1e-5000"])
def test_parse_fraction_rejects_garbage(text):
    with pytest.raises(DomainError):
        parse_fraction(text)


def test_number_formatting():
    assert format_rational(Fraction(4, 25)) == "4/25"
    assert format_rational(0) == "0/1"
    assert format_value(Fraction(4, 25)) == "4/25 (0.16)"
    assert format_value(Fraction(2)) == "2 (2)"
    assert format_value(0.5) == "0.5"


def test_box_format():
    data = box_to_dict(make_pr_box())
    assert data["n_pairs"] == 1
    assert data["arithmetic"] == "rational"
    assert data["probs"][:4] == ["1/2", "0/1", "1/2", "0/1"]
    assert box_from_dict(data) == make_pr_box()


def test_float_box_format():
    box = make_singlet_box(90, 60, 0, 30)
    data = box_to_dict(box)
    assert all(isinstance(p, float) for p in data["probs"])
    assert box_from_dict(json.loads(dumps(data))).allclose(box)


def test_rational_box_rejects_float_entries():
    data = box_to_dict(make_pr_box())
    data["probs"][0] = 0.5
    with pytest.raises(DomainError):
        box_from_dict(data)


def test_unnormalized_box_file_is_rejected():
    data = box_to_dict(make_pr_box())
    data["probs"][0] = "1/4"
    with pytest.raises(PreconditionError):
        box_from_dict(data)


def test_partition_format(iso_tenth):
    partition = single_box_attack(iso_tenth)
    decoded = partition_from_dict(json.loads(dumps(partition_to_dict(partition))))
    assert decoded.labels == partition.labels
    assert distance_from_uniform(decoded) == Fraction(1, 5)


def test_lp_and_certificate_format(iso_tenth):
    lp = build_xor_primal(iso_tenth, 1, 0)
    cert = single_box_certificate(iso_tenth, 1, 0)
    lp_data = json.loads(dumps(lp_to_dict(lp)))
    assert lp_data["vars"] == 16
    assert lp_data["rows"][0] == {"coeffs": {"0": "1/1", "1": "1/1", "2": "-1/1", "3": "-1/1"}, "rhs": "0/1"}
    cert_data = json.loads(dumps(certificate_to_dict(cert)))
    assert cert_data["claimed_bound"] == "2/5"
    assert verify_certificate(lp_from_dict(lp_data), certificate_from_dict(cert_data))


def test_factored_certificate_format(iso_tenth):
    inputs = [(0, 0), (1, 1), (0, 1)]
    cert = tensor_certificate(inputs, [iso_tenth] * 3, expand=False)
    data = json.loads(dumps(certificate_to_dict(cert)))
    assert "lambda" not in data
    assert len(data["factors"]) == 3 and all(len(lam) == 48 for lam in data["factors"])
    assert data["claimed_bound"] == "8/125"
    decoded = certificate_from_dict(data)
    assert decoded == cert
    assert verify_tensor_certificate(inputs, [iso_tenth] * 3, decoded)


def test_config_format():
    config = ProtocolConfig(n=16, k=512, seed=3)
    data = json.loads(dumps(config_to_dict(config)))
    assert data["balance_window"] == [0.4, 0.6]
    assert data["s"] == "auto"
    assert config_from_dict(data) == config
    assert config_from_dict({"n": 16, "k": 512, "s": "auto"}).s is None
    assert config_from_dict({"n": 16, "k": 512, "s": 3}).s == 3


def test_config_with_missing_fields():
    with pytest.raises(DomainError):
        config_from_dict({"k": 5})


def test_json_files(tmp_path):
    path = tmp_path / "nested" / "box.json"
    write_json_file(box_to_dict(make_isotropic_box(Fraction(1, 10))), path)
    assert box_from_dict(read_json_file(path)) == make_isotropic_box(Fraction(1, 10))
    assert path.read_text(encoding="utf-8").endswith("}\n")


def test_read_missing_file(tmp_path):
    with pytest.raises(NskdError, match="not found"):
        read_json_file(tmp_path / "missing.json")


def test_read_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"n_pairs\": 1,", encoding="utf-8")
    with pytest.raises(NskdError, match="invalid JSON"):
        read_json_file(path)


def test_write_unserializable_data(tmp_path):
    with pytest.raises(NskdError):
        write_json_file({"value": object()}, tmp_path / "x.json")


def test_atomic_write_replaces_file(tmp_path):
    path = tmp_path / "out.txt"
    write_file_atomic(path, "first")
    write_file_atomic(path, "second")
    assert path.read_text(encoding="utf-8") == "second"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_csv_output(tmp_path):
    table = pd.DataFrame([{"delta": 0.0, "epsilon": 0.25, "rate": 0.0, "feasible": False,
                           "epsilon_max": 0.25}])
    text = table_to_csv(table)
    assert text.splitlines()[0] == "delta,epsilon,rate,feasible,epsilon_max"
    path = tmp_path / "region.csv"
    write_csv_atomic(table, path)
    assert path.read_text(encoding="utf-8") == text
