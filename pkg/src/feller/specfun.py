"""Real-argument exponential integrals and the Kummer confluent function M.

These back the closed-form solution families: steady states and the
conservation-law diagnostic need E1/Ei with the principal-value convention
at negative arguments, and the spectral point symmetry needs M(a, b, z).
All functions are pure, scalar and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Euler-Mascheroni constant, 20 digits.
EULER_GAMMA = 0.57721566490153286061

# E1 series/continued-fraction switch; both converge in <30 iterations there.
_E1_SWITCH = 1.5
# Ei power-series/asymptotic switch at positive arguments.  The asymptotic
# series bottoms out at ~sqrt(2*pi*x)*exp(-x), which only reaches 1e-12 for
# x >~ 40; below that the (all-positive) power series is used instead.
_EI_ASYMPTOTIC_MIN = 40.0
# exp(-x) underflows past here, so E1(x) is an exact float 0.
_E1_UNDERFLOW = 745.0
_MAX_ITER = 400

_KUMMER_Z_BOUND = 200.0


class NonConvergenceError(ArithmeticError):
    """A series or continued fraction failed to reach the requested tolerance."""


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for series evaluation.

    max_terms : hard cap on summed terms (>= 1)
    tol       : relative truncation tolerance, 0 < tol < 1
    """

    max_terms: int = 500
    tol: float = 1e-15

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie strictly between 0 and 1")


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = integral_1^inf exp(-t*x)/t dt, x > 0.

    Relative error <= 1e-12 over x in [1e-8, 700]; underflows to 0 beyond
    the range of exp(-x).
    """
    if x <= 0.0:
        raise ValueError(
            "exp_integral_e1 requires x > 0; use e1_negative_principal for x < 0"
        )
    if x > _E1_UNDERFLOW:
        return 0.0
    if x <= _E1_SWITCH:
        return _e1_series(x)
    return _e1_continued_fraction(x)


def exp_integral_ei(x: float) -> float:
    """Principal-value exponential integral Ei(x), x != 0.

    Satisfies Ei(x) = -E1(-x) for x < 0; only the real part of the boundary
    value is ever represented (see e1_negative_principal).
    """
    if x == 0.0:
        raise ValueError("Ei has a logarithmic singularity at x = 0")
    if x < 0.0:
        return -exp_integral_e1(-x)
    if x >= _EI_ASYMPTOTIC_MIN:
        return _ei_asymptotic(x)
    return _ei_series(x)


def e1_negative_principal(x: float) -> float:
    """Real part of the boundary value of E1 at negative arguments.

    lim_{d->0} E1(x +- i d) = -Ei(-x) -+ i*pi for x < 0; the constant
    imaginary offset is dropped, so this returns -Ei(-x).
    """
    if x >= 0.0:
        raise ValueError("e1_negative_principal requires x < 0")
    return -exp_integral_ei(-x)


def kummer_m(a: float, b: float, z: float, ctrl: SeriesControl = SeriesControl()) -> float:
    """Kummer confluent hypergeometric M(a, b, z) by direct series.

    Truncates when |term| / |partial sum| < ctrl.tol.  Raises
    NonConvergenceError past |z| = 200 or when max_terms is exhausted,
    rather than silently losing digits.
    """
    if b <= 0.0 and b == math.floor(b):
        raise ValueError("b must not be a non-positive integer")
    if abs(z) > _KUMMER_Z_BOUND:
        raise NonConvergenceError(
            f"kummer_m series is only trusted for |z| <= {_KUMMER_Z_BOUND:g}; got z={z:g}"
        )
    if z < 0.0:
        # Kummer transformation: the direct series alternates and cancels
        # catastrophically at negative arguments.
        return math.exp(z) * _kummer_series(b - a, b, -z, ctrl)
    return _kummer_series(a, b, z, ctrl)


def _kummer_series(a: float, b: float, z: float, ctrl: SeriesControl) -> float:
    # Kahan-compensated summation keeps evaluation noise near 1 ulp, which
    # matters when the result is finite-difference differentiated.
    total = 1.0
    comp = 0.0
    term = 1.0
    for n in range(ctrl.max_terms):
        term *= (a + n) * z / ((b + n) * (n + 1))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(term) <= ctrl.tol * abs(total):
            return total
    raise NonConvergenceError(
        f"Kummer M series hit max_terms={ctrl.max_terms} before tol={ctrl.tol:g} "
        f"at (a={a:g}, b={b:g}, z={z:g})"
    )


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n * n!)
    total = -EULER_GAMMA - math.log(x)
    t = 1.0
    for n in range(1, _MAX_ITER):
        t *= -x / n
        delta = -t / n
        total += delta
        if abs(delta) <= 1e-17 * abs(total):
            return total
    raise NonConvergenceError(f"E1 power series stalled at x={x:g}")


def _e1_continued_fraction(x: float) -> float:
    # Modified Lentz on E1(x) = exp(-x) / (x+1 - 1/(x+3 - 4/(x+5 - 9/(...)))).
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * math.exp(-x)
    raise NonConvergenceError(f"E1 continued fraction stalled at x={x:g}")


def _ei_series(x: float) -> float:
    # Ei(x) = gamma + ln x + sum_{n>=1} x^n/(n*n!); all terms positive.
    total = EULER_GAMMA + math.log(x)
    t = 1.0
    for n in range(1, _MAX_ITER):
        t *= x / n
        delta = t / n
        total += delta
        if delta <= 1e-17 * abs(total):
            return total
    raise NonConvergenceError(f"Ei power series stalled at x={x:g}")


def _ei_asymptotic(x: float) -> float:
    # Ei(x) ~ (e^x / x) * sum_{n>=0} n!/x^n, truncated at the smallest term.
    s = 1.0
    t = 1.0
    for n in range(1, _MAX_ITER):
        t_next = t * n / x
        if t_next >= t:
            break
        t = t_next
        s += t
        if t <= 1e-17 * s:
            break
    return math.exp(x) / x * s
