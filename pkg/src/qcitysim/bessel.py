"""Modified Bessel functions of the first kind, orders 0 and 1.

Power series below ``SERIES_LIMIT``, Hankel asymptotic expansion above.
Both branches hold relative error below 1e-9 on [0, 50]; the scaled form
``exp(-x) * I_n(x)`` stays finite for arbitrarily large ``x``.
"""
from __future__ import annotations

import math

SERIES_LIMIT = 15.0
_TOL = 1e-17


def _series(order: int, x: float) -> float:
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    half = 0.5 * x
    term = half**order / math.factorial(order)
    total = term
    q = half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + order))
        total += term
        if term <= _TOL * total:
            return total


def _asymptotic_scaled(order: int, x: float) -> float:
    # e^{-x} I_n(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k / x^k
    mu = 4.0 * order * order
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(nxt) >= abs(term):  # series starts diverging
            break
        term = nxt
        total += term
        if abs(term) < _TOL * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i(order: int, x: float, scaled: bool = False) -> float:
    """I_order(x) for order in {0, 1} and x >= 0.

    With ``scaled=True`` returns ``exp(-x) * I_order(x)``.
    """
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    x = float(x)
    if x < 0.0 or math.isnan(x):
        raise ValueError("x must be >= 0")
    if x < SERIES_LIMIT:
        value = _series(order, x)
        return value * math.exp(-x) if scaled else value
    value = _asymptotic_scaled(order, x)
    if scaled:
        return value
    # exp overflows near 709.8; keep the product in log space
    return math.exp(x + math.log(value)) if x > 700.0 else value * math.exp(x)


def i0(x: float) -> float:
    return bessel_i(0, x)


def i1(x: float) -> float:
    return bessel_i(1, x)


def i0e(x: float) -> float:
    return bessel_i(0, x, scaled=True)


def i1e(x: float) -> float:
    return bessel_i(1, x, scaled=True)
