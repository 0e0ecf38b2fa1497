"""Exact-in-distribution sampling of symmetric alpha-stable Levy motion.

Increments over a cell of length dt are drawn as (c*dt)**(1/alpha) * S where S
is standard symmetric stable with characteristic function exp(-|t|**alpha),
generated by the Chambers-Mallows-Stuck transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pvarlab.core import SamplePath


@dataclass(frozen=True)
class ProcessSpec:
    alpha: float
    c: float = 1.0
    T: float = 1.0
    family: str = "stable-levy"

    def __post_init__(self):
        if self.family != "stable-levy":
            raise ValueError(f"unknown process family {self.family!r}")
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not self.c > 0:
            raise ValueError("scale c must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    def increment_scale(self, dt: float) -> float:
        return (self.c * dt) ** (1.0 / self.alpha)


@dataclass(frozen=True)
class MeshSpec:
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("mesh needs at least one point")

    def times(self, T: float) -> np.ndarray:
        if self.n == 1:
            return np.zeros(1)
        t = np.linspace(0.0, T, self.n)
        t[-1] = T
        return t


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, stream...).

    Distinct stream tuples give statistically independent generators, so
    ensemble members can be simulated in any order.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _check(alpha, c, dt):
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if not c > 0:
        raise ValueError("scale c must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")


def standard_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Standard symmetric stable draws, characteristic function exp(-|t|**alpha)."""
    if alpha == 2.0:
        # CMS reduces to 2 sin(V) sqrt(W), i.e. N(0, 2)
        return rng.normal(0.0, math.sqrt(2.0), size=size)
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    if alpha == 1.0:
        return np.tan(v)
    w = rng.standard_exponential(size=size)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def stable_increments(alpha: float, c: float, dt: float, size, rng: np.random.Generator) -> np.ndarray:
    _check(alpha, c, dt)
    return (c * dt) ** (1.0 / alpha) * standard_stable(alpha, size, rng)


def sample_stable_increment(alpha: float, c: float, dt: float, rng: np.random.Generator) -> float:
    return float(stable_increments(alpha, c, dt, 1, rng)[0])


def simulate_values(spec: ProcessSpec, n: int, rng: np.random.Generator, n_paths: int | None = None) -> np.ndarray:
    """Values on a uniform n-point mesh; shape (n,) or (n_paths, n)."""
    if n < 1:
        raise ValueError("mesh needs at least one point")
    shape = (n - 1,) if n_paths is None else (n_paths, n - 1)
    out = np.zeros(shape[:-1] + (n,))
    if n > 1:
        dt = spec.T / (n - 1)
        np.cumsum(stable_increments(spec.alpha, spec.c, dt, shape, rng), axis=-1, out=out[..., 1:])
    return out


def simulate_path(spec: ProcessSpec, mesh: MeshSpec, seed: int, index: int = 0) -> SamplePath:
    """One path started at 0; a pure function of (spec, mesh, seed, index)."""
    mesh = mesh if isinstance(mesh, MeshSpec) else MeshSpec(int(mesh))
    rng = make_rng(seed, index)
    values = simulate_values(spec, mesh.n, rng)
    return SamplePath(mesh.times(spec.T), values, spec.T if mesh.n > 1 else 0.0)
