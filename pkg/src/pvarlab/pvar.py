"""p-variation and oscillation statistics of sampled real-valued paths.

All partitions run through sample points only, so every quantity here is
exact for the discrete path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from pvarlab.core import SamplePath, r1_cutoff

BRUTEFORCE_MAX_LEN = 22


def _level(r: int) -> float:
    # dyadic_size without the |r| <= 60 guard; fine levels are needed for tiny gaps
    return math.ldexp(1.0, -int(r) - 1)


def _values(path) -> np.ndarray:
    if isinstance(path, SamplePath):
        return path.values
    x = np.asarray(path, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-d sequence of values")
    return x


# ---------------------------------------------------------------------------
# p-variation
# ---------------------------------------------------------------------------

def _extrema_index(x: np.ndarray) -> np.ndarray:
    n = x.size
    if n <= 2:
        return np.arange(n)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(x) != 0) + 1))
    if starts.size == 1:
        return np.array([0, n - 1])
    # a trailing plateau is represented by the final sample so T stays anchored
    starts[-1] = n - 1
    d = np.diff(x[starts])
    turn = np.flatnonzero(d[:-1] * d[1:] < 0) + 1
    return np.concatenate(([0], starts[turn], [n - 1]))


def extrema_reduce(path: SamplePath) -> SamplePath:
    """Keep the endpoints and the strict local extrema (plateaus collapsed).

    For p >= 1 this leaves the p-variation unchanged.
    """
    idx = _extrema_index(path.values)
    return SamplePath(path.times[idx], path.values[idx], path.horizon)


@numba.njit(cache=True)
def _pvar_dp(x, p):
    n = x.size
    if n < 2:
        return 0.0
    # aligned-block max/min tables, level k covers blocks of 2**k samples
    levels = 0
    while (1 << (levels + 1)) <= n:
        levels += 1
    bmax = np.empty((levels + 1, n))
    bmin = np.empty((levels + 1, n))
    bmax[0, :] = x
    bmin[0, :] = x
    for k in range(1, levels + 1):
        nb = n >> k
        for i in range(nb):
            bmax[k, i] = max(bmax[k - 1, 2 * i], bmax[k - 1, 2 * i + 1])
            bmin[k, i] = min(bmin[k - 1, 2 * i], bmin[k - 1, 2 * i + 1])

    best = np.zeros(n)
    for j in range(1, n):
        xj = x[j]
        cur = best[j - 1] + abs(xj - x[j - 1]) ** p
        m = j - 2
        while m >= 0:
            slack = cur - best[m]
            # best is nondecreasing, so slack at m is the smallest over any block ending at m
            skipped = False
            k = 0
            t = m + 1
            while (t & 1) == 0 and k < levels:
                t >>= 1
                k += 1
            while k >= 1:
                blk = ((m + 1) >> k) - 1
                far = max(xj - bmin[k, blk], bmax[k, blk] - xj)
                if far ** p <= slack:
                    m -= 1 << k
                    skipped = True
                    break
                k -= 1
            if skipped:
                continue
            val = best[m] + abs(xj - x[m]) ** p
            if val > cur:
                cur = val
            m -= 1
        best[j] = cur
    return best[n - 1]


def pvar_exact(path, p: float) -> float:
    """p-variation over partitions through the sample points.

    For p <= 1 the finest partition is optimal; otherwise a pruned dynamic
    program over the local extrema, best[j] = max_i best[i] + |x_j - x_i|**p.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    x = _values(path)
    if x.size == 0:
        raise ValueError("empty path")
    if x.size == 1:
        return 0.0
    if p <= 1:
        return float(np.sum(np.abs(np.diff(x)) ** p))
    y = np.ascontiguousarray(x[_extrema_index(x)])
    return float(_pvar_dp(y, float(p)))


def pvar_dp_reference(path, p: float) -> float:
    """Plain O(n^2) recurrence with no pruning and no extrema reduction."""
    x = _values(path)
    best = np.zeros(x.size)
    for j in range(1, x.size):
        best[j] = np.max(best[:j] + np.abs(x[j] - x[:j]) ** p)
    return float(best[-1]) if x.size else 0.0


def pvar_bruteforce(path, p: float) -> float:
    """Enumerate every anchored subsequence; only for short paths."""
    if not p > 0:
        raise ValueError("p must be positive")
    x = _values(path)
    n = x.size
    if n == 0:
        raise ValueError("empty path")
    if n > BRUTEFORCE_MAX_LEN:
        raise ValueError(f"brute force limited to {BRUTEFORCE_MAX_LEN} samples")
    if n == 1:
        return 0.0
    inner = n - 2
    best = 0.0
    for mask in range(1 << inner):
        prev = x[0]
        total = 0.0
        for k in range(inner):
            if mask >> k & 1:
                total += abs(x[k + 1] - prev) ** p
                prev = x[k + 1]
        total += abs(x[-1] - prev) ** p
        best = max(best, total)
    return best


# ---------------------------------------------------------------------------
# ranges and stopping times
# ---------------------------------------------------------------------------

def window_range(path, i: int, j: int) -> float:
    """max - min of the values on samples i..j inclusive."""
    x = _values(path)
    if not 0 <= i <= j < x.size:
        raise IndexError(f"window [{i}, {j}] outside path of length {x.size}")
    w = x[i:j + 1]
    return float(w.max() - w.min())


@numba.njit(cache=True)
def _stopping_indices(x, level, max_count):
    n = x.size
    out = np.empty(n, dtype=np.int64)
    out[0] = 0
    count = 1
    lo = x[0]
    hi = x[0]
    truncated = False
    for t in range(1, n):
        v = x[t]
        if v < lo:
            lo = v
        if v > hi:
            hi = v
        if hi - lo > level:
            if max_count >= 0 and count - 1 >= max_count:
                truncated = True
                break
            out[count] = t
            count += 1
            lo = v
            hi = v
    return out[:count], truncated


@dataclass(frozen=True)
class StoppingRecord:
    """Successive first times the running window range exceeds M_r.

    `terminated` is True when the scan ran off the end of the path (no further
    exceedance), False when it was cut short by a requested maximum count.
    """

    r: int
    times: np.ndarray
    indices: np.ndarray
    terminated: bool

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def count(self) -> int:
        """Number of stopping times after tau_0."""
        return self.times.size - 1


def stopping_times(path: SamplePath, r: int, max_count: int | None = None) -> StoppingRecord:
    x = np.ascontiguousarray(path.values)
    idx, truncated = _stopping_indices(x, _level(r), -1 if max_count is None else int(max_count))
    return StoppingRecord(int(r), path.times[idx], idx, not truncated)


# ---------------------------------------------------------------------------
# oscillation and band counts
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _oscillations(x, b):
    count = 0
    lo = x[0]
    hi = x[0]
    for e in range(1, x.size):
        v = x[e]
        if v - lo > b or hi - v > b:
            count += 1
            lo = v
            hi = v
        else:
            if v < lo:
                lo = v
            if v > hi:
                hi = v
    return count


def oscillation_count(path, b: float) -> int:
    """Maximum number of pairs s1 < e1 <= s2 < e2 <= ... with |x[e] - x[s]| > b.

    Greedy on the earliest feasible right endpoint, which is optimal for
    interval selection with touching endpoints allowed.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    x = np.ascontiguousarray(_values(path))
    if x.size < 2:
        return 0
    return int(_oscillations(x, float(b)))


@numba.njit(cache=True)
def _band_pairs(x, lo, hi):
    n = x.size
    buf = np.empty(n)  # sorted values of the current window
    w = 0
    wmin = 0.0
    wmax = 0.0
    count = 0
    buf[0] = x[0]
    w = 1
    wmin = x[0]
    wmax = x[0]
    for e in range(1, n):
        v = x[e]
        hit = False
        if v - wmin >= lo or wmax - v >= lo:
            tol = 4e-16 * (abs(v) + hi) + 1e-300
            # below v: s in (v - hi, v - lo]
            i0 = np.searchsorted(buf[:w], v - hi - tol)
            i1 = np.searchsorted(buf[:w], v - lo + tol, side="right")
            for i in range(i0, i1):
                d = abs(v - buf[i])
                if d >= lo and d < hi:
                    hit = True
                    break
            if not hit:
                # above v: s in [v + lo, v + hi)
                i0 = np.searchsorted(buf[:w], v + lo - tol)
                i1 = np.searchsorted(buf[:w], v + hi + tol, side="right")
                for i in range(i0, i1):
                    d = abs(v - buf[i])
                    if d >= lo and d < hi:
                        hit = True
                        break
        if hit:
            count += 1
            buf[0] = v
            w = 1
            wmin = v
            wmax = v
        else:
            pos = np.searchsorted(buf[:w], v)
            buf[pos + 1:w + 1] = buf[pos:w].copy()
            buf[pos] = v
            w += 1
            if v < wmin:
                wmin = v
            if v > wmax:
                wmax = v
    return count


def band_count(path, r: int) -> int:
    """Y_r: the largest number of partition increments with size in [M_r, M_{r-1}).

    Computed as a maximum set of touching-allowed index pairs whose
    difference lies in the band, via the earliest-endpoint greedy.
    """
    x = np.ascontiguousarray(_values(path))
    if x.size < 2:
        return 0
    return int(_band_pairs(x, _level(r), _level(r - 1)))


# ---------------------------------------------------------------------------
# dyadic decomposition bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillationProfile:
    p: float
    a0: float
    r1: int
    band_counts: dict = field(default_factory=dict)
    nu0: int = 0
    Mhat: float = 0.0
    dyadic_bound: float = 0.0

    @property
    def small_part(self) -> float:
        """Contribution of the levels r > r1."""
        return math.fsum(2.0 ** (-r * self.p) * y for r, y in self.band_counts.items())

    def to_dict(self) -> dict:
        return {
            "p": self.p, "a0": self.a0, "r1": self.r1,
            "band_counts": {str(r): y for r, y in sorted(self.band_counts.items())},
            "nu0": self.nu0, "Mhat": self.Mhat, "dyadic_bound": self.dyadic_bound,
        }


def _level_of(d: float) -> int:
    """The r with M_r <= d < M_{r-1}."""
    m, e = math.frexp(d)  # d = m * 2**e, m in [0.5, 1)
    # M_r = 2**(-r-1) <= d  <=>  -r-1 <= e-1
    return -e


def dyadic_upper_bound(path, p: float, a0: float) -> OscillationProfile:
    """Split increments at r1 = r1_cutoff(a0) into dyadic bands and big oscillations.

    bound = sum_{r > r1} 2**(-r p) Y_r + (2 Mhat)**p nu0, which dominates the
    p-variation of the path.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    r1 = r1_cutoff(a0)
    x = np.ascontiguousarray(_values(path))
    if x.size < 2:
        return OscillationProfile(float(p), float(a0), r1)
    mhat = float(np.max(np.abs(x - x[0])))
    nu0 = oscillation_count(x, a0 / 2.0)
    u = np.unique(x)
    counts = {}
    if u.size > 1:
        gmin = float(np.min(np.diff(u)))
        span = float(u[-1] - u[0])
        r_lo = max(r1 + 1, _level_of(span))
        r_hi = _level_of(gmin)
        for r in range(r_lo, r_hi + 1):
            y = band_count(x, r)
            if y:
                counts[r] = y
    terms = [2.0 ** (-r * p) * y for r, y in counts.items()]
    bound = math.fsum(terms) + (2.0 * mhat) ** p * nu0
    return OscillationProfile(float(p), float(a0), r1, counts, nu0, mhat, bound)
