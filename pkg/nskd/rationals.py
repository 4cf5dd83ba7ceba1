"""
Rationals Module - Exact Number Parsing and Formatting

This module provides the number handling shared by every other module:
- Parsing "p/q" strings, integers and decimal strings into exact Fractions
- Coercing mixed user input into a single arithmetic mode
- Formatting values as "p/q" strings and 12-significant-digit decimals
"""

from decimal import Decimal, InvalidOperation
from fractions import Fraction
from numbers import Rational
from typing import Union

from .errors import DomainError

Number = Union[Fraction, float, int]

RATIONAL = "rational"
FLOAT = "float"

# decimal exponents beyond this would expand into huge integers
MAX_DECIMAL_EXPONENT = 1000


def parse_fraction(fraction_str: str) -> Fraction:
    """
    Parse a command-line number exactly.

    Accepts "p/q", plain integers and decimal notation ("0.1" becomes 1/10,
    never the nearest binary double).

    Args:
        fraction_str (str): Text to parse

    Returns:
        Fraction: The exact value

    Example:
        parse_fraction('3/20')   # Fraction(3, 20)
        parse_fraction('0.15')   # Fraction(3, 20)
    """
    text = fraction_str.strip()
    try:
        if '/' in text:
            numerator, denominator = map(int, text.split('/'))
            return Fraction(numerator, denominator)
        value = Decimal(text)
        if not value.is_finite():
            raise DomainError(f"'{fraction_str}' is not a finite number")
        if abs(value.as_tuple().exponent) > MAX_DECIMAL_EXPONENT:
            raise DomainError(f"exponent of '{fraction_str}' exceeds {MAX_DECIMAL_EXPONENT}")
        return Fraction(value)
    except (ValueError, ZeroDivisionError, InvalidOperation, OverflowError) as e:
        raise DomainError(f"cannot parse '{fraction_str}' as a rational number") from e


def to_exact(value: Number) -> Fraction:
    """Convert a number to a Fraction; floats convert to their exact binary value."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return parse_fraction(value)
    return Fraction(value)


def arithmetic_of(*values: Number) -> str:
    """Return FLOAT if any value is a float, else RATIONAL."""
    return FLOAT if any(isinstance(v, float) for v in values) else RATIONAL


def coerce(value: Number, arithmetic: str) -> Number:
    """Represent value in the given arithmetic mode."""
    if arithmetic == RATIONAL:
        return to_exact(value)
    return float(value)


def format_rational(value: Number) -> str:
    """Format an exact value as "p/q" (integers as "p/1")."""
    value = to_exact(value)
    return f"{value.numerator}/{value.denominator}"


def format_decimal(value: Number) -> str:
    """12 significant digits, the precision used on stdout."""
    return f"{float(value):.12g}"


def format_value(value: Number) -> str:
    """
    Human-facing rendering: "p/q (decimal)" for exact values, decimal otherwise.

    Example:
        format_value(Fraction(4, 25))   # '4/25 (0.16)'
        format_value(0.1926450779)      # '0.1926450779'
    """
    if isinstance(value, Rational):
        value = Fraction(value)
        if value.denominator == 1:
            return f"{value.numerator} ({format_decimal(value)})"
        return f"{value.numerator}/{value.denominator} ({format_decimal(value)})"
    return format_decimal(value)
