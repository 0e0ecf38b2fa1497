"""Transition-tail estimation, power-law envelope fitting and the Ottaviani check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from pvarlab.core import ClassEnvelope
from pvarlab.simulate import ProcessSpec, make_rng, stable_increments

CONFIDENCE = 0.99
MIN_SAMPLES = 1000
CHUNK = 200_000


def wilson_interval(k: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Wilson score interval for k successes out of n."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # keep the point estimate inside despite rounding at k = 0 or k = n
    return min(lo, phat), max(hi, phat)


@dataclass(frozen=True)
class TailCell:
    h: float
    a: float
    alpha_hat: float
    n_samples: int
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not self.ci_low <= self.alpha_hat <= self.ci_high:
            raise ValueError("confidence interval must contain the estimate")

    @classmethod
    def from_counts(cls, h, a, k, n):
        lo, hi = wilson_interval(k, n)
        return cls(float(h), float(a), k / n, int(n), lo, hi)

    @classmethod
    def exact(cls, h, a, value, n=1):
        """A noiseless cell, e.g. from an analytic tail."""
        return cls(float(h), float(a), float(value), int(n), float(value), float(value))


@dataclass
class TailGrid:
    cells: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)

    def to_csv(self, fh) -> None:
        fh.write("h,a,alpha_hat,n,ci_low,ci_high\n")
        for c in self.cells:
            fh.write(f"{c.h:.17g},{c.a:.17g},{c.alpha_hat:.17g},{c.n_samples},"
                     f"{c.ci_low:.17g},{c.ci_high:.17g}\n")

    @classmethod
    def from_csv(cls, fh) -> "TailGrid":
        header = fh.readline().strip()
        if header != "h,a,alpha_hat,n,ci_low,ci_high":
            raise ValueError(f"unexpected tail grid header {header!r}")
        cells = []
        for line in fh:
            if not line.strip():
                continue
            h, a, ah, n, lo, hi = line.strip().split(",")
            cells.append(TailCell(float(h), float(a), float(ah), int(n), float(lo), float(hi)))
        return cls(cells)


def _count_exceed(spec, h, thresholds, n, rng):
    """Counts of |X_h| >= a for each a, by chunked sampling."""
    counts = np.zeros(len(thresholds), dtype=np.int64)
    done = 0
    th = np.asarray(thresholds, dtype=float)
    while done < n:
        m = min(CHUNK, n - done)
        z = np.abs(stable_increments(spec.alpha, spec.c, h, m, rng))
        counts += (z[:, None] >= th[None, :]).sum(axis=0)
        done += m
    return counts


def estimate_alpha(spec: ProcessSpec, h: float, a: float, n: int, seed: int) -> TailCell:
    """Monte Carlo estimate of alpha(h, a) = P(|X_h| >= a).

    For stable Levy motion the sup over start state and start time collapses
    to a single lag h: increments are homogeneous and their tail grows with h.
    """
    if not 0 < h <= spec.T:
        raise ValueError("h must lie in (0, T]")
    if not a > 0:
        raise ValueError("a must be positive")
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    k = int(_count_exceed(spec, h, [a], n, make_rng(seed))[0])
    return TailCell.from_counts(h, a, k, n)


def estimate_grid(spec: ProcessSpec, hs, as_, n: int, seed: int) -> TailGrid:
    """All (h, a) cells; one independent stream per h, shared across a."""
    cells = []
    for i, h in enumerate(hs):
        if not 0 < h <= spec.T:
            raise ValueError("h must lie in (0, T]")
        counts = _count_exceed(spec, h, as_, n, make_rng(seed, 1, i))
        cells.extend(TailCell.from_counts(h, a, int(k), n) for a, k in zip(as_, counts))
    return TailGrid(cells)


@dataclass(frozen=True)
class KernelFit:
    envelope: ClassEnvelope | None
    residual: float
    verdict: str
    beta_raw: float = float("nan")
    n_cells: int = 0

    @property
    def pstar(self) -> float:
        return self.envelope.pstar if self.envelope else float("nan")

    def to_dict(self) -> dict:
        return {
            "envelope": self.envelope.to_dict() if self.envelope else None,
            "residual": self.residual,
            "verdict": self.verdict,
            "beta_raw": self.beta_raw,
            "n_cells": self.n_cells,
        }


def envelope_holds(cell: TailCell, env: ClassEnvelope) -> bool:
    """A cell is consistent with the envelope when its lower CI end sits below it."""
    return cell.ci_low <= env(cell.h, cell.a) * (1.0 + 1e-12)


def fit_envelope(grid: TailGrid, T: float) -> KernelFit:
    """Least-squares fit of log alpha = log K + beta log h - gamma log a.

    Cells with alpha_hat in (0, 0.5) take part. A raw beta below 1 is clamped
    (gamma and K refitted with beta = 1) and the verdict is "rejected".
    """
    cells = [c for c in grid if 0 < c.alpha_hat < 0.5 and c.h <= T]
    hs = {c.h for c in cells}
    as_ = {c.a for c in cells}
    if len(hs) < 3 or len(as_) < 3:
        return KernelFit(None, float("nan"), "inconclusive", n_cells=len(cells))

    lh = np.log([c.h for c in cells])
    la = np.log([c.a for c in cells])
    ly = np.log([c.alpha_hat for c in cells])
    X = np.column_stack([np.ones_like(lh), lh, -la])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    logK, beta, gamma = (float(v) for v in coef)
    beta_raw = beta
    verdict = None
    if beta < 1:
        beta = 1.0
        X2 = np.column_stack([np.ones_like(lh), -la])
        (logK, gamma), *_ = np.linalg.lstsq(X2, ly - lh, rcond=None)
        verdict = "rejected"
    if not gamma > 0:
        return KernelFit(None, float("nan"), "rejected", beta_raw, len(cells))
    resid = ly - (logK + beta * lh - gamma * la)
    env = ClassEnvelope(math.exp(logK), beta, float(gamma), max(as_))
    if verdict is None:
        verdict = "member" if all(envelope_holds(c, env) for c in grid if c.h <= T) else "inconclusive"
    return KernelFit(env, float(np.max(np.abs(resid))), verdict, beta_raw, len(cells))


@dataclass(frozen=True)
class OttavianiResult:
    lhs: float
    rhs: float
    se: float
    alpha_half: float
    holds: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "se": self.se,
                "alpha_half": self.alpha_half, "holds": self.holds}


def ottaviani_check(spec: ProcessSpec, t: float, h: float, M: float, n_paths: int, seed: int,
                    inner: int = 256, chunk: int = 10_000) -> OttavianiResult:
    """Monte Carlo check of the Ottaviani-type maximal inequality over [t, (t+h) ^ T].

    The running sup is taken over an `inner`-point mesh, which can only
    under-estimate the left side.
    """
    if inner < 256:
        raise ValueError("inner mesh needs at least 256 points")
    if not (0 <= t <= spec.T and h > 0 and M > 0 and n_paths >= 1):
        raise ValueError("invalid arguments")
    span = min(t + h, spec.T) - t
    n_alpha = max(n_paths, MIN_SAMPLES)
    a_half = estimate_alpha(spec, min(h, spec.T), M / 2.0, n_alpha, seed ^ 0x5EED)
    if a_half.alpha_hat >= 0.5:
        raise ValueError(f"alpha(h, M/2) estimate {a_half.alpha_hat:.3g} too large for a usable bound")

    n_sup = n_end = 0
    if span > 0:
        rng = make_rng(seed, 2)
        dt = span / (inner - 1)
        done = 0
        while done < n_paths:
            m = min(chunk, n_paths - done)
            x = np.cumsum(stable_increments(spec.alpha, spec.c, dt, (m, inner - 1), rng), axis=1)
            n_sup += int(np.count_nonzero(np.max(np.abs(x), axis=1) > M))
            n_end += int(np.count_nonzero(np.abs(x[:, -1]) > M / 2.0))
            done += m
    lhs = n_sup / n_paths
    q = n_end / n_paths
    d = 1.0 - a_half.alpha_hat
    rhs = q / d
    var_l = lhs * (1 - lhs) / n_paths
    # delta method for q / (1 - a)
    var_r = (q * (1 - q) / n_paths) / d**2 + (q**2 / d**4) * a_half.alpha_hat * (1 - a_half.alpha_hat) / n_alpha
    se = math.sqrt(var_l + var_r)
    return OttavianiResult(lhs, rhs, se, a_half.alpha_hat, lhs <= rhs + 3 * se)
