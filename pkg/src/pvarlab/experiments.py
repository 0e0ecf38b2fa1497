"""Ensemble drivers: sharpness of the p-variation exponent, envelope membership
and Monte Carlo validation of the stopping-time and band-count bounds."""

from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from pvarlab.bounds import BoundReport, bound_report, expected_band_bound, tau_tail_bound
from pvarlab.core import ClassEnvelope, SamplePath, r1_cutoff
from pvarlab.kernel import KernelFit, TailCell, TailGrid, estimate_grid, fit_envelope, ottaviani_check
from pvarlab.pvar import band_count, dyadic_upper_bound, pvar_exact, stopping_times
from pvarlab.simulate import MeshSpec, ProcessSpec, make_rng, simulate_values

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

_LISTS = {"meshes": int, "ps": float, "tail_h": float, "tail_a": float, "levels": int,
          "js": int, "ottaviani_h": float, "ottaviani_M": float, "alphas": float}


@dataclass
class ExperimentConfig:
    alpha: float = 1.2
    c: float = 1.0
    T: float = 1.0
    meshes: list = field(default_factory=lambda: [2**k + 1 for k in range(10, 17)])
    ps: list = field(default_factory=lambda: [1.0, 1.5])
    n_paths: int = 100
    seed: int = 0
    a0: float = 1.0
    out: str = "out"
    # classification policy
    diverge_factor: float = 2.0
    stable_tol: float = 0.2
    # tail grid
    tail_h: list = field(default_factory=lambda: [2.0**-k for k in range(10, 5, -1)])
    tail_a: list = field(default_factory=lambda: [2.0**-k for k in range(4, 0, -1)])
    tail_samples: int = 100_000
    # envelope used by bound validation; K <= 0 means "fit it"
    K: float = 0.0
    beta: float = 1.0
    gamma: float = 1.0
    levels: list = field(default_factory=lambda: [2, 3, 4])
    js: list = field(default_factory=lambda: [1, 2, 3])
    validation_mesh: int = 2**12 + 1
    dyadic_paths: int = 100
    ottaviani_h: list = field(default_factory=list)
    ottaviani_M: list = field(default_factory=list)
    ottaviani_paths: int = 100_000
    bound_p: float = 0.0

    def __post_init__(self):
        self.meshes = [int(n) for n in self.meshes]
        self.ps = [float(p) for p in self.ps]
        if any(b <= a for a, b in zip(self.meshes, self.meshes[1:])):
            raise ValueError("mesh ladder must be strictly increasing")
        if any(n < 1 for n in self.meshes):
            raise ValueError("mesh sizes must be >= 1")
        if self.ps != sorted(self.ps) or any(p <= 0 for p in self.ps):
            raise ValueError("p grid must be sorted and positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.a0 > 0:
            raise ValueError("a0 must be positive")
        self.spec  # validates the process parameters

    @property
    def spec(self) -> ProcessSpec:
        return ProcessSpec(self.alpha, self.c, self.T)

    @property
    def envelope(self) -> ClassEnvelope | None:
        if self.K > 0:
            return ClassEnvelope(self.K, self.beta, self.gamma, self.a0)
        return None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def parse_config(text: str) -> dict:
    """Parse flat `key = value` lines; '#' starts a comment, lists are comma separated."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _LISTS:
            conv = _LISTS[key]
            out[key] = [conv(_num(v)) for v in val.split(",") if v.strip()]
        elif types[key] in ("int", int):
            out[key] = int(_num(val))
        elif types[key] in ("float", float):
            out[key] = float(_num(val))
        else:
            out[key] = val
    return out


_POWER = re.compile(r"([0-9.]+)\s*\^\s*([-0-9.]+)\s*([+-]\s*[0-9]+)?")


def _num(s: str) -> float:
    s = s.strip()
    # allow 2^12 and 2^12+1 style entries in ladders
    m = _POWER.fullmatch(s)
    if m:
        base, exp, off = m.groups()
        v = float(base) ** float(exp) + (float(off.replace(" ", "")) if off else 0.0)
        return int(v) if v.is_integer() and "." not in s else v
    if "^" in s:
        raise ValueError(f"cannot parse {s!r}")
    v = float(s)
    return int(v) if v.is_integer() and "." not in s and "e" not in s.lower() else v


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(parse_config(fh.read()))


@dataclass
class RunManifest:
    config: dict
    summary: list = field(default_factory=list)
    classification: dict = field(default_factory=dict)
    tailgrid: TailGrid | None = None
    fit: KernelFit | None = None
    bounds: BoundReport | None = None
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0
    format_version: int = FORMAT_VERSION

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "config": self.config,
            "summary": self.summary,
            "classification": {str(k): v for k, v in self.classification.items()},
            "tailgrid": [asdict(c) for c in self.tailgrid] if self.tailgrid else [],
            "fit": self.fit.to_dict() if self.fit else None,
            "bounds": self.bounds.to_dict() if self.bounds else None,
            "checks": self.checks,
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported manifest format version")
        grid = TailGrid([TailCell(**c) for c in d.get("tailgrid") or []]) or None
        fit = None
        if d.get("fit"):
            f = d["fit"]
            env = f["envelope"]
            env = ClassEnvelope(env["K"], env["beta"], env["gamma"], env["a0"]) if env else None
            fit = KernelFit(env, f["residual"], f["verdict"], f.get("beta_raw", float("nan")), f.get("n_cells", 0))
        bounds = None
        if d.get("bounds"):
            b = d["bounds"]
            env = b["envelope"]
            bounds = BoundReport(ClassEnvelope(env["K"], env["beta"], env["gamma"], env["a0"]),
                                 b["T"], b["levels"], b["tau_tails"], b["C1"], b.get("p"))
        return cls(d["config"], d["summary"], d["classification"], grid, fit, bounds,
                   d["checks"], d["wall_clock"], d["format_version"])


# ---------------------------------------------------------------------------
# sharpness
# ---------------------------------------------------------------------------

def classify(medians, diverge_factor: float = 2.0, stable_tol: float = 0.2) -> str:
    """'diverging' if medians never decrease and grow by diverge_factor overall,
    else 'stabilizing' if the top two meshes differ by at most stable_tol."""
    m = np.asarray(medians, dtype=float)
    if m.size < 2:
        return "inconclusive"
    if np.all(np.diff(m) >= 0) and m[0] > 0 and m[-1] / m[0] >= diverge_factor:
        return "diverging"
    if m[-2] > 0 and abs(m[-1] / m[-2] - 1) <= stable_tol:
        return "stabilizing"
    return "inconclusive"


def _nested(meshes) -> bool:
    top = meshes[-1] - 1
    return all(n > 1 and top % (n - 1) == 0 for n in meshes)


def pvar_ensemble(config: ExperimentConfig) -> np.ndarray:
    """v_p for every (path, mesh, p); shape (n_paths, len(meshes), len(ps)).

    When every mesh divides the finest one, each path is simulated once on
    the finest mesh and coarser meshes are its subsamples.
    """
    spec = config.spec
    meshes, ps = config.meshes, config.ps
    out = np.zeros((config.n_paths, len(meshes), len(ps)))
    nested = _nested(meshes)
    for i in range(config.n_paths):
        if nested:
            x = simulate_values(spec, meshes[-1], make_rng(config.seed, i))
        for m, n in enumerate(meshes):
            if nested:
                y = x[:: (meshes[-1] - 1) // (n - 1)]
            else:
                y = simulate_values(spec, n, make_rng(config.seed, i, m))
            for k, p in enumerate(ps):
                out[i, m, k] = pvar_exact(y, p)
    return out


def run_sharpness(config: ExperimentConfig) -> RunManifest:
    t0 = time.perf_counter()
    vals = pvar_ensemble(config)
    summary = []
    classes = {}
    for k, p in enumerate(config.ps):
        med = np.median(vals[:, :, k], axis=0)
        lo = np.percentile(vals[:, :, k], 5, axis=0)
        hi = np.percentile(vals[:, :, k], 95, axis=0)
        cls = classify(med, config.diverge_factor, config.stable_tol)
        classes[p] = cls
        for m, n in enumerate(config.meshes):
            summary.append({"mesh_n": n, "p": p, "median_vp": float(med[m]),
                            "p05": float(lo[m]), "p95": float(hi[m]), "classification": cls})
        log.info("p=%g: %s (medians %s)", p, cls, np.round(med, 4))
    return RunManifest(config.to_dict(), summary, classes, wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def report_levels(env: ClassEnvelope, count: int = 6) -> list:
    r1 = r1_cutoff(env.a0)
    return list(range(r1 + 1, r1 + 1 + count))


def run_membership(config: ExperimentConfig, grid: TailGrid | None = None) -> RunManifest:
    """Estimate the tail grid (unless given), fit the envelope, attach bounds."""
    t0 = time.perf_counter()
    if grid is None:
        grid = estimate_grid(config.spec, config.tail_h, config.tail_a, config.tail_samples, config.seed)
    fit = fit_envelope(grid, config.T)
    bounds = None
    if fit.envelope is not None:
        p = config.bound_p or (max(config.ps) if config.ps else None)
        bounds = bound_report(fit.envelope, config.T, report_levels(fit.envelope), config.js, p)
    return RunManifest(config.to_dict(), tailgrid=grid, fit=fit, bounds=bounds,
                       wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# bound validation
# ---------------------------------------------------------------------------

def _check(name, measured, bound, se=0.0, sigmas=3.0, **extra):
    limit = bound + sigmas * se
    return {"name": name, "measured": float(measured), "bound": float(bound), "se": float(se),
            "margin": float(limit - measured), "passed": bool(measured <= limit), **extra}


def domination_stats(config: ExperimentConfig, n_paths: int | None = None):
    """Per-path stopping-time counts and band counts on the validation mesh.

    Returns (counts, bands): arrays of shape (n_paths, len(levels)).
    """
    n_paths = config.n_paths if n_paths is None else n_paths
    spec = config.spec
    jmax = max(config.js)
    n = config.validation_mesh
    times = MeshSpec(n).times(spec.T)
    counts = np.zeros((n_paths, len(config.levels)), dtype=np.int64)
    bands = np.zeros_like(counts)
    for i in range(n_paths):
        x = simulate_values(spec, n, make_rng(config.seed, 3, i))
        path = SamplePath(times, x, spec.T)
        for k, r in enumerate(config.levels):
            counts[i, k] = stopping_times(path, r, max_count=jmax).count
            bands[i, k] = band_count(x, r)
    return counts, bands


def run_bound_validation(config: ExperimentConfig, env: ClassEnvelope | None = None) -> RunManifest:
    """Monte Carlo domination checks for the tau-tail and band-count bounds,
    the per-path dyadic decomposition inequality and the Ottaviani inequality."""
    t0 = time.perf_counter()
    env = env or config.envelope
    fit = None
    grid = None
    if env is None:
        member = run_membership(config)
        fit, grid = member.fit, member.tailgrid
        if fit.envelope is None:
            raise ValueError("no envelope available: fit was inconclusive")
        env = fit.envelope
    T = config.T
    checks = []

    counts, bands = domination_stats(config)
    n = counts.shape[0]
    for k, r in enumerate(config.levels):
        for j in config.js:
            hit = counts[:, k] >= j
            ph = hit.mean()
            checks.append(_check(f"tau_tail r={r} j={j}", ph, tau_tail_bound(j, r, env, T),
                                 math.sqrt(ph * (1 - ph) / n), r=r, j=j))
        y = bands[:, k].astype(float)
        se = y.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
        checks.append(_check(f"band_mean r={r}", y.mean(), expected_band_bound(r, env, T), se, r=r))

    spec = config.spec
    n_mesh = config.validation_mesh
    worst = math.inf
    violations = 0
    total = 0
    for i in range(config.dyadic_paths):
        x = simulate_values(spec, n_mesh, make_rng(config.seed, 4, i))
        for p in config.ps:
            v = pvar_exact(x, p)
            b = dyadic_upper_bound(x, p, config.a0).dyadic_bound
            total += 1
            if v > b:
                violations += 1
            worst = min(worst, b - v)
    checks.append({"name": "dyadic_bound", "measured": float(violations), "bound": 0.0, "se": 0.0,
                   "margin": float(worst) if total else 0.0, "passed": violations == 0, "paths": total})

    for a, h in enumerate(config.ottaviani_h):
        for b, M in enumerate(config.ottaviani_M):
            res = ottaviani_check(spec, 0.0, h, M, config.ottaviani_paths, config.seed + 1000 * a + b)
            checks.append(_check(f"ottaviani h={h:g} M={M:g}", res.lhs, res.rhs, res.se, h=h, M=M))

    bounds = bound_report(env, T, config.levels, config.js,
                          config.bound_p or (max(config.ps) if config.ps else None))
    return RunManifest(config.to_dict(), tailgrid=grid, fit=fit, bounds=bounds, checks=checks,
                       wall_clock=time.perf_counter() - t0)
