"""Exact rational helpers shared by the instance and model writers."""

from fractions import Fraction


def to_fraction(value):
    """Coerce int / str / Fraction / finite float into a Fraction.

    Strings are parsed exactly (``"0.0576"`` is 576/10000, not the nearest
    binary double).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _terminates(den):
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    return den == 1, max(twos, fives)


def format_rational(value):
    """Shortest exact decimal for terminating rationals, else 17 significant digits."""
    q = to_fraction(value)
    if q.denominator == 1:
        return str(q.numerator)
    ok, digits = _terminates(q.denominator)
    if not ok:
        return format(float(q), ".17g")
    scaled = abs(q.numerator) * 10**digits // q.denominator
    text = str(scaled).rjust(digits + 1, "0")
    whole, frac = text[:-digits], text[-digits:].rstrip("0")
    sign = "-" if q < 0 else ""
    return f"{sign}{whole}.{frac}"
