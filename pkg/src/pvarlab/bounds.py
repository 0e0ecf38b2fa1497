"""Closed-form bounds for stopping-time durations, band counts and the tail constant.

Everything takes a ClassEnvelope: the bounds hold for the true transition
tail, and the envelope is the only bridge from data to these formulas.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

from pvarlab.core import ClassEnvelope, r1_cutoff

GAMMA_X_MAX = 3.0
UNIT_TR_LAPLACE_BOUND = math.exp(-1.0) + 7.0 / 24.0  # < 0.660


class VacuousBound(ValueError):
    """The envelope is too large at the requested point for the bound to say anything."""


def _level(r: int) -> float:
    return math.ldexp(1.0, -int(r) - 1)


def lower_incomplete_gamma(a: float, x: float) -> float:
    """gamma(a, x) = sum_k (-1)^k x^(k+a) / (k! (k+a)), for 0 <= x <= 3.

    Terms are accumulated as exact rationals (the float inputs are exact
    binary fractions), so the alternating cancellation costs nothing.
    Summation stops once the next term drops below 1e-16 of the partial sum;
    the alternating tail is then bounded by that term.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not 0 <= x <= GAMMA_X_MAX:
        raise ValueError(f"x must lie in [0, {GAMMA_X_MAX}]")
    if x == 0:
        return 0.0
    fx = Fraction(x)
    fa = Fraction(a)
    total = Fraction(0)
    power = Fraction(1)  # (-1)^k x^k / k!
    k = 0
    while True:
        total += power / (k + fa)
        k += 1
        power *= -fx / k
        # terms only shrink once k exceeds x
        if k > x and abs(float(power / (k + fa))) < 1e-16 * abs(float(total)):
            break
    return x**a * float(total)


def gamma_series_upper(a: float, x: float) -> float:
    """Three-term upper bound x^a/a (1 - a x/(a+1) + a x^2/(2(a+2))).

    Valid for 0 <= x < 3(3+a)/(2+a).
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not 0 <= x < 3 * (3 + a) / (2 + a):
        raise ValueError("x outside the validity window of the three-term bound")
    return x**a / a * (1 - a / (a + 1) * x + a / (2 * (a + 2)) * x * x)


def scaled_gamma_gap(a: float) -> float:
    """a gamma(a, 1) - 1/e, which lies in (0, 7/24) for a >= 1."""
    if not a >= 1:
        raise ValueError("a must be >= 1")
    return a * lower_incomplete_gamma(a, 1.0) - math.exp(-1.0)


def envelope_at(u: float, r: int, env: ClassEnvelope) -> float:
    """Envelope value K u^beta / (M_{r+2} ^ a0)^gamma."""
    return env(u, _level(r + 2))


def duration_tail_bound(u: float, r: int, env: ClassEnvelope) -> float:
    """Bound e/(1-e) on P(zeta_{i,r} <= u | past), e the envelope at (u, M_{r+2})."""
    if u < 0:
        raise ValueError("u must be nonnegative")
    e = envelope_at(u, r, env)
    if e >= 1:
        raise VacuousBound(f"envelope value {e:.4g} >= 1")
    return e / (1 - e)


def laplace_duration_bound(T0: float, r: int, env: ClassEnvelope, T: float = 1.0) -> float:
    """e^{-T0} + 2K (M_{r+2} ^ a0)^{-gamma} gamma(beta+1, T0).

    Requires the envelope at (T0, M_{r+2}) to be at most 1/2.
    """
    if not 0 < T0 <= min(T, 1.0):
        raise ValueError("T0 must lie in (0, min(T, 1)]")
    # slack absorbs rounding when T0 is exactly the T_r of compute_Tr
    if envelope_at(T0, r, env) > 0.5 * (1 + 1e-12):
        raise VacuousBound("envelope at T0 exceeds 1/2")
    m = min(_level(r + 2), env.a0)
    b = env.beta
    # gamma(b+1, T0) via integration by parts keeps the series argument at order b
    g = -T0**b * math.exp(-T0) + b * lower_incomplete_gamma(b, T0)
    return math.exp(-T0) + 2 * env.K / m**env.gamma * max(g, 0.0)


def compute_Tr(r: int, env: ClassEnvelope, T: float) -> float:
    """T_r = min{((M_{r+2} ^ a0)^gamma / (2K))^{1/beta}, T, 1}."""
    m = min(_level(r + 2), env.a0)
    return min((m**env.gamma / (2 * env.K)) ** (1 / env.beta), T, 1.0)


def laplace_bound_from_Tr(Tr: float, beta: float) -> float:
    if Tr < 1:
        return beta * lower_incomplete_gamma(beta, Tr) / Tr**beta
    return UNIT_TR_LAPLACE_BOUND


def laplace_bound_r(r: int, env: ClassEnvelope, T: float) -> float:
    """Bound on E(exp(-zeta_{i,r}) | past).

    Below 1 in exact arithmetic; the gap is about beta T_r/(beta+1), so for
    T_r under ~1e-16 the double result is 1.0.
    """
    return laplace_bound_from_Tr(compute_Tr(r, env, T), env.beta)


def tau_tail_bound(j: int, r: int, env: ClassEnvelope, T: float) -> float:
    """e^T L_r^j bounding P(tau_{j,r} <= T). Not clamped to [0, 1]."""
    if int(j) != j or j < 1:
        raise ValueError("j must be a positive integer")
    return math.exp(T) * laplace_bound_r(r, env, T) ** int(j)


def expected_band_bound(r: int, env: ClassEnvelope, T: float) -> float:
    """4 e^T / T_r when T_r < 1, otherwise 1.95 e^T."""
    Tr = compute_Tr(r, env, T)
    if Tr < 1:
        return 4 * math.exp(T) / Tr
    return 1.95 * math.exp(T)


def tail_constant_C1(env: ClassEnvelope, T: float, p: float) -> float:
    """Constant C1 with P(S_1 > N/2) <= C1 / N for p > gamma/beta."""
    ps = env.pstar
    if not p > ps:
        raise ValueError(f"p = {p} must exceed gamma/beta = {ps}")
    r1 = r1_cutoff(env.a0)
    b, g = env.beta, env.gamma
    first = (6 + 4 / T) * 2.0 ** (-(r1 + 1) * p) / (1 - 2.0**-p)
    second = (env.K ** (1 / b) * 2.0 ** (2 + (3 * g + 1) / b - (r1 + 1) * (p - ps))
              / (1 - 2.0 ** -(p - ps)))
    return 2 * math.exp(T) * (first + second)


@dataclass
class BoundReport:
    envelope: ClassEnvelope
    T: float
    levels: list = field(default_factory=list)
    tau_tails: list = field(default_factory=list)
    C1: float | None = None
    p: float | None = None

    def to_dict(self) -> dict:
        return {
            "envelope": self.envelope.to_dict(),
            "T": self.T,
            "levels": self.levels,
            "tau_tails": self.tau_tails,
            "C1": self.C1,
            "p": self.p,
        }


def bound_report(env: ClassEnvelope, T: float, levels, js=(1, 2, 3), p: float | None = None) -> BoundReport:
    rows = []
    tails = []
    for r in levels:
        rows.append({
            "r": int(r),
            "Tr": compute_Tr(r, env, T),
            "laplace": laplace_bound_r(r, env, T),
            "ey_bound": expected_band_bound(r, env, T),
        })
        for j in js:
            tails.append({"j": int(j), "r": int(r), "bound": tau_tail_bound(j, r, env, T)})
    C1 = tail_constant_C1(env, T, p) if p is not None and p > env.pstar else None
    return BoundReport(env, T, rows, tails, C1, p)
