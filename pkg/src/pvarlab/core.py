"""Shared types: sampled paths, dyadic levels and the power-law class envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_LEVEL = 60


def metric(x: float, y: float) -> float:
    return abs(x - y)


def dyadic_size(r: int) -> float:
    """Return M_r = 2**(-r-1); exact in binary for |r| <= 60."""
    r = int(r)
    if abs(r) > MAX_LEVEL:
        raise ValueError(f"dyadic level {r} outside [-{MAX_LEVEL}, {MAX_LEVEL}]")
    return math.ldexp(1.0, -r - 1)


def r1_cutoff(a0: float) -> int:
    """Largest integer r1 with r1 <= -(log2(a0) + 3).

    Uses frexp so that exact powers of two land on the integer without
    rounding noise from a floating log.
    """
    if not a0 > 0 or not math.isfinite(a0):
        raise ValueError("a0 must be positive and finite")
    mant, exp = math.frexp(a0)
    if mant == 0.5:
        # a0 = 2**(exp-1) exactly
        return -(exp - 1) - 3
    return math.floor(-(math.log2(a0) + 3))


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    horizon: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        x = np.array(self.values, dtype=float)
        if t.ndim != 1 or x.ndim != 1 or t.size != x.size:
            raise ValueError("times and values must be 1-d and equal length")
        if t.size < 1:
            raise ValueError("a path needs at least one sample")
        if t[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(x)):
            raise ValueError("values must be finite")
        horizon = float(t[-1]) if self.horizon is None else float(self.horizon)
        if t.size > 1 and horizon != t[-1]:
            raise ValueError("last time must equal the horizon")
        if t.size == 1 and horizon < 0:
            raise ValueError("horizon must be nonnegative")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)
        object.__setattr__(self, "horizon", horizon)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_values(cls, values, horizon: float = 1.0) -> "SamplePath":
        """Place values on a uniform grid over [0, horizon]."""
        x = np.asarray(values, dtype=float)
        if x.size == 1:
            return cls(np.zeros(1), x, 0.0)
        return cls(np.linspace(0.0, horizon, x.size), x, horizon)

    def subsample(self, step: int) -> "SamplePath":
        """Every `step`-th sample; the last sample must be on the stride."""
        if (self.values.size - 1) % step:
            raise ValueError("step does not divide the number of cells")
        return SamplePath(self.times[::step], self.values[::step], self.horizon)

    def to_csv(self, fh) -> None:
        fh.write("t,x\n")
        for t, x in zip(self.times, self.values):
            fh.write(f"{t:.17g},{x:.17g}\n")


@dataclass(frozen=True)
class ClassEnvelope:
    """Power-law bound alpha(h, a) <= K h**beta / min(a, a0)**gamma."""

    K: float
    beta: float
    gamma: float
    a0: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.beta >= 1:
            raise ValueError("beta must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.a0 > 0:
            raise ValueError("a0 must be positive")

    @property
    def pstar(self) -> float:
        return self.gamma / self.beta

    def __call__(self, h: float, a: float) -> float:
        return self.K * h**self.beta / min(a, self.a0) ** self.gamma

    def to_dict(self) -> dict:
        return {"K": self.K, "beta": self.beta, "gamma": self.gamma,
                "a0": self.a0, "pstar": self.pstar}
