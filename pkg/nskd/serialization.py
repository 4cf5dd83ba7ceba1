"""
Serialization Module - JSON Codecs

This module provides the JSON formats shared by the command line and tests:
- Boxes: {"n_pairs", "arithmetic", "probs"} with rationals as "p/q" strings
- Partitions: {"marginal", "elements": [{"weight", "label", "box"}]}
- Linear programs and dual certificates
- Protocol configs and transcripts
- Reading and writing JSON files with specific error reporting
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from .boxcore import ConditionalBox
from .errors import DimensionError, DomainError, NskdError
from .file_writer import write_file_atomic
from .lpcert import DualCertificate, LinearProgram
from .partition import BoxPartition, PartitionElement
from .protocol import ProtocolConfig, Transcript
from .rationals import FLOAT, RATIONAL, format_rational, parse_fraction

logger = logging.getLogger(__name__)


class RationalEncoder(json.JSONEncoder):
    """
    JSON encoder for Fractions ("p/q") and numpy scalars and arrays.
    """
    def default(self, obj):
        if isinstance(obj, Fraction):
            return format_rational(obj)
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)


def dumps(data: Any) -> str:
    """Deterministic JSON text: two-space indent, trailing newline."""
    return json.dumps(data, indent=2, cls=RationalEncoder) + "\n"


def _decode_number(value, arithmetic: str):
    if arithmetic == RATIONAL:
        if isinstance(value, float):
            raise DomainError(f"rational file holds a float entry {value}; use \"p/q\"")
        return parse_fraction(str(value))
    return float(parse_fraction(value)) if isinstance(value, str) else float(value)


def _encode_number(value):
    return format_rational(value) if isinstance(value, (Fraction, int)) else float(value)


# ----------------------------------------------------------------------
# Boxes and partitions
# ----------------------------------------------------------------------

def box_to_dict(box: ConditionalBox) -> Dict[str, Any]:
    return {
        'n_pairs': box.n_pairs,
        'arithmetic': box.arithmetic,
        'probs': [_encode_number(p) for p in box.probs],
    }


def box_from_dict(data: Dict[str, Any]) -> ConditionalBox:
    """
    Decode a box, validating entry count and normalization.

    Example:
        box = box_from_dict({'n_pairs': 1, 'arithmetic': 'rational', 'probs': [...]})
    """
    try:
        n_pairs = int(data['n_pairs'])
        arithmetic = data.get('arithmetic', RATIONAL)
        probs = data['probs']
    except (KeyError, TypeError) as e:
        raise DimensionError(f"box object is missing field {e}") from e
    if arithmetic not in (RATIONAL, FLOAT):
        raise DomainError(f"unknown arithmetic '{arithmetic}'")
    return ConditionalBox(n_pairs, tuple(_decode_number(p, arithmetic) for p in probs), arithmetic)


def partition_to_dict(partition: BoxPartition) -> Dict[str, Any]:
    return {
        'marginal': box_to_dict(partition.marginal),
        'elements': [{'weight': _encode_number(e.weight), 'label': e.label, 'box': box_to_dict(e.box)}
                     for e in partition.elements],
    }


def partition_from_dict(data: Dict[str, Any]) -> BoxPartition:
    marginal = box_from_dict(data['marginal'])
    elements = []
    for item in data['elements']:
        box = box_from_dict(item['box'])
        elements.append(PartitionElement(_decode_number(item['weight'], box.arithmetic),
                                         box, str(item.get('label', ''))))
    return BoxPartition(marginal, tuple(elements))


# ----------------------------------------------------------------------
# Linear programs and certificates
# ----------------------------------------------------------------------

def _sparse_to_dict(row) -> Dict[str, str]:
    return {str(j): format_rational(a) for j, a in sorted(row.items())}


def _sparse_from_dict(data) -> Dict[int, Fraction]:
    return {int(j): parse_fraction(str(a)) for j, a in data.items()}


def lp_to_dict(lp: LinearProgram) -> Dict[str, Any]:
    return {
        'vars': lp.n_vars,
        'rows': [{'coeffs': _sparse_to_dict(row), 'rhs': format_rational(r)}
                 for row, r in zip(lp.rows, lp.rhs)],
        'objective': _sparse_to_dict(lp.objective),
    }


def lp_from_dict(data: Dict[str, Any]) -> LinearProgram:
    rows = tuple(_sparse_from_dict(item['coeffs']) for item in data['rows'])
    rhs = tuple(parse_fraction(str(item['rhs'])) for item in data['rows'])
    return LinearProgram(int(data['vars']), rows, rhs, _sparse_from_dict(data['objective']))


def certificate_to_dict(cert: DualCertificate) -> Dict[str, Any]:
    return cert.to_dict()


def certificate_from_dict(data: Dict[str, Any]) -> DualCertificate:
    """Decode a flat ({"lambda"}) or factored ({"factors"}) certificate."""
    bound = parse_fraction(str(data["claimed_bound"]))
    if "factors" in data:
        factors = tuple(tuple(parse_fraction(str(x)) for x in lam) for lam in data["factors"])
        return DualCertificate(lam=(), claimed_bound=bound, factors=factors)
    return DualCertificate(lam=tuple(parse_fraction(str(x)) for x in data["lambda"]), claimed_bound=bound)


# ----------------------------------------------------------------------
# Protocol
# ----------------------------------------------------------------------

def config_to_dict(config: ProtocolConfig) -> Dict[str, Any]:
    return config.to_dict()


def config_from_dict(data: Dict[str, Any]) -> ProtocolConfig:
    try:
        return ProtocolConfig.from_dict(data)
    except TypeError as e:
        raise DomainError(f"invalid protocol config: {e}") from e


def transcript_to_dict(transcript: Transcript) -> Dict[str, Any]:
    return transcript.to_dict()


def transcript_from_dict(data: Dict[str, Any]) -> Transcript:
    return Transcript.from_dict(data)


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------

def read_json_file(file_path: Union[str, Path], encoding: str = 'utf-8') -> Any:
    """
    Read and parse a JSON file.

    Raises:
        NskdError: with the specific cause (missing file, permissions, bad JSON)

    Example:
        box = box_from_dict(read_json_file('pr.json'))
    """
    try:
        with open(file_path, 'r', encoding=encoding) as file:
            data = json.load(file)
    except FileNotFoundError as e:
        logger.error("JSON file '%s' not found", file_path)
        raise NskdError(f"file '{file_path}' not found") from e
    except PermissionError as e:
        logger.error("Permission denied reading '%s'", file_path)
        raise NskdError(f"permission denied reading '{file_path}'") from e
    except json.JSONDecodeError as e:
        logger.error("Invalid JSON in '%s' at line %d, column %d", file_path, e.lineno, e.colno)
        raise NskdError(f"invalid JSON in '{file_path}' at line {e.lineno}, column {e.colno}: {e.msg}") from e
    logger.debug("Loaded JSON from '%s'", file_path)
    return data


def write_json_file(data: Any, file_path: Union[str, Path], encoding: str = 'utf-8') -> None:
    """Serialize data with RationalEncoder and write it atomically."""
    try:
        text = dumps(data)
    except TypeError as e:
        raise NskdError(f"data is not JSON serializable: {e}") from e
    write_file_atomic(file_path, text, encoding=encoding)
