"""Small helpers around gmpy2 contexts and decimal output."""
from __future__ import annotations

import gmpy2

LOG10_2 = 0.30102999566398120


def workprec(bits: int):
    """Context manager running gmpy2 arithmetic at ``bits`` of mantissa."""
    return gmpy2.context(gmpy2.get_context(), precision=bits)


def decimal_digits(bits: int) -> int:
    """Significant digits that let a ``bits``-wide binary value round-trip exactly."""
    return int(bits * LOG10_2) + 2


def to_decimal(x, digits: int | None = None) -> str:
    """Scientific-notation string of an mpfr carrying all its significant digits."""
    if digits is None:
        digits = decimal_digits(x.precision)
    if gmpy2.is_nan(x):
        return "nan"
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if gmpy2.is_zero(x):
        return "0." + "0" * (digits - 1) + "e+00"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    e = exp - 1
    return f"{sign}{mant[0]}.{mant[1:]}e{'+' if e >= 0 else '-'}{abs(e):02d}"
