from __future__ import annotations

from decimal import Decimal


def fmt_float(x: float) -> str:
    """Render a float at 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


def fmt_time(t: Decimal) -> str:
    # normalize() would turn 10 into 1E+1
    s = format(t, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s
