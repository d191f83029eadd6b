"""Monte Carlo crossing counts from circulant-embedding sample paths.

A path on ``n`` grid points is the first ``n`` entries of a stationary
Gaussian sequence on a ring of ``M`` points whose covariance is ``r(k dt)``
folded symmetrically. ``M`` is the smallest power of two >= 4n, doubled until
``|r|`` over the outer half of the folded lags is below ``TAIL_TOL`` (at most 64 times). Path ``i`` of an
ensemble draws its normals from its own generator, seeded by
``splitmix64(master + (i + 1) * GOLDEN)``, so any batching or ordering of the
work gives the same counts.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import fft as sfft

from .covariance import CovarianceModel, NotSimulableError
from .curves import CurveSpec

MAX_POINTS = 2 ** 22
CLIP_LIMIT = 1e-3
TAIL_TOL = 1e-10
MAX_RING = 2 ** 22
GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


class EmbeddingError(ValueError):
    """Circulant embedding has too much negative spectral mass."""


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (64-bit mix)."""
    z = (x + GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def path_seed(master_seed: int, index: int) -> int:
    return splitmix64((int(master_seed) + (index + 1) * GOLDEN) & _MASK)


@dataclass
class PathGrid:
    dt: float
    n: int
    values: np.ndarray
    seed: int
    clipped_mass: float = 0.0

    def __post_init__(self):
        if self.n < 2 or not self.dt > 0 or len(self.values) != self.n:
            raise ValueError("PathGrid needs n >= 2, dt > 0 and n values")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n)

    def to_csv(self, path) -> None:
        """Write columns ``t,X``."""
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header="t,X", comments="", fmt="%.17g")


@dataclass
class Embedding:
    dt: float
    n: int
    ring: int
    sqrt_eig: np.ndarray  # sqrt of the half-spectrum, length ring/2 + 1
    clipped_mass: float


def circulant_embedding(model: CovarianceModel, dt: float, n: int,
                        clip_limit: float = CLIP_LIMIT) -> Embedding:
    if not getattr(model, "simulable", True):
        raise NotSimulableError(f"model {model.name!r} is diagnostics-only and cannot be simulated")
    if n < 2 or not dt > 0:
        raise ValueError("need n >= 2 and dt > 0")
    if n > MAX_POINTS:
        raise ValueError(f"{n} grid points exceeds the limit of {MAX_POINTS}")
    ring = 1 << max(1, (4 * n - 1).bit_length())
    cap = min(MAX_RING, 64 * ring)
    while True:
        half = ring // 2
        c = np.asarray(model.covariance_sequence(dt, half + 1), dtype=float)
        # a correlation still visible at the fold puts a kink into the ring
        if np.max(np.abs(c[half // 2:])) <= TAIL_TOL or ring >= cap:
            break
        ring *= 2
    row = np.concatenate([c, c[half - 1:0:-1]])
    eig = sfft.rfft(row).real
    weight = np.full(eig.shape, 2.0)
    weight[0] = 1.0
    weight[-1] = 1.0
    neg = float(np.sum(weight * np.clip(-eig, 0.0, None)))
    mass = neg / float(np.sum(weight * np.abs(eig)))
    if mass > clip_limit:
        raise EmbeddingError(
            f"circulant embedding clips {mass:.2e} of the spectral mass (limit {clip_limit:g}); "
            "use a smaller dt or a longer ring")
    return Embedding(dt, n, ring, np.sqrt(np.clip(eig, 0.0, None)), mass)


def _draw(emb: Embedding, seeds: Sequence[int], workers: Optional[int] = None) -> np.ndarray:
    ring, half = emb.ring, emb.ring // 2
    z = np.empty((len(seeds), ring))
    for i, s in enumerate(seeds):
        z[i] = np.random.default_rng(s).standard_normal(ring)
    w = np.empty((len(seeds), half + 1), dtype=complex)
    w.real[:, 0] = z[:, 0]
    w.imag[:, 0] = 0.0
    w.real[:, half] = z[:, 1]
    w.imag[:, half] = 0.0
    w.real[:, 1:half] = z[:, 2:half + 1] * math.sqrt(0.5)
    w.imag[:, 1:half] = z[:, half + 1:] * math.sqrt(0.5)
    w *= emb.sqrt_eig
    x = sfft.irfft(w, n=ring, axis=1, workers=workers) * math.sqrt(ring)
    return x[:, :emb.n]


def _grid_points(t: float, dt: float) -> int:
    steps = t / dt
    n = int(round(steps))
    if abs(steps - n) > 1e-9 * max(1.0, steps):
        raise ValueError(f"t={t!r} is not a whole number of dt={dt!r} steps")
    return n + 1


def sample_path(model: CovarianceModel, t: float, dt: float, seed: int) -> PathGrid:
    """One path on ``[0, t]`` with spacing ``dt``; deterministic given ``seed``."""
    n = _grid_points(t, dt)
    emb = circulant_embedding(model, dt, n)
    return PathGrid(dt, n, _draw(emb, [int(seed)])[0], int(seed), emb.clipped_mass)


def _target_values(target, times):
    if isinstance(target, CurveSpec):
        return np.asarray(target.psi(times), dtype=float)
    return float(target)


def _signs(y: np.ndarray) -> np.ndarray:
    """Signs with zeros replaced by the left neighbour's sign (leading zeros stay 0)."""
    s = np.sign(y)
    idx = np.where(s != 0, np.arange(s.shape[-1]), 0)
    np.maximum.accumulate(idx, axis=-1, out=idx)
    return np.take_along_axis(s, idx, axis=-1)


def crossing_flags(values: np.ndarray, target, times: Optional[np.ndarray] = None) -> np.ndarray:
    """Boolean sign-change indicators between consecutive grid points."""
    values = np.asarray(values, dtype=float)
    if times is None:
        times = np.arange(values.shape[-1], dtype=float)
    s = _signs(values - _target_values(target, times))
    # leading zeros take the first nonzero sign to their right, which adds no change
    return (s[..., 1:] * s[..., :-1]) < 0


def count_crossings(path: Union[PathGrid, np.ndarray], target=0.0) -> int:
    """Number of strict sign changes of X - target over the grid."""
    if isinstance(path, PathGrid):
        values, times = path.values, path.times
    else:
        values = np.asarray(path, dtype=float)
        times = np.arange(values.size, dtype=float)
    return int(np.sum(crossing_flags(values, target, times)))


@dataclass
class McSummary:
    n_paths: int
    target: Union[float, str]
    t: float
    dt: float
    mean_count: float
    second_factorial: float
    variance: float
    se_mean: float
    se_second_factorial: float
    se_variance: float
    seed: int
    seed_rule: str = "splitmix64(seed + (i+1)*0x9E3779B97F4A7C15) -> numpy default_rng"
    clipped_mass: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def summarize_counts(counts: np.ndarray) -> dict:
    """Sample moments of crossing counts and their standard errors."""
    n = np.asarray(counts, dtype=float)
    k = n.size
    f = n * (n - 1.0)
    mean, fmean = float(n.mean()), float(f.mean())
    if k < 2:
        return dict(mean_count=mean, second_factorial=fmean, variance=0.0,
                    se_mean=math.inf, se_second_factorial=math.inf, se_variance=math.inf)
    var = float(n.var(ddof=1))
    c = n - mean
    m4 = float(np.mean(c ** 4))
    # Var(s^2) ~ (mu4 - sigma^4 (k-3)/(k-1)) / k
    vv = max(m4 - var * var * (k - 3.0) / (k - 1.0), 0.0) / k
    return dict(mean_count=mean, second_factorial=fmean, variance=var,
                se_mean=math.sqrt(var / k), se_second_factorial=float(f.std(ddof=1)) / math.sqrt(k),
                se_variance=math.sqrt(vv))


def _target_id(target):
    return target.name if isinstance(target, CurveSpec) else float(target)


def mc_counts(model: CovarianceModel, target, t: float, dt: float, n_paths: int, seed: int,
              *, subsample: Sequence[int] = (1,), windows: int = 1, batch: int = 64,
              workers: Optional[int] = None):
    """Crossing counts, shape ``(len(subsample), windows, n_paths)``.

    ``subsample[k] = s`` counts on every ``s``-th grid point of the same path,
    i.e. at spacing ``s dt``; ``windows`` splits ``[0, t]`` into equal parts.
    Returns ``(counts, clipped_mass)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n = _grid_points(t, dt)
    emb = circulant_embedding(model, dt, n)
    times = dt * np.arange(n)
    psi = _target_values(target, times)
    steps = n - 1
    for s in subsample:
        if s < 1 or steps % (s * windows):
            raise ValueError(f"subsample {s} and {windows} windows must divide {steps} steps")
    out = np.zeros((len(subsample), windows, n_paths), dtype=np.int64)
    for start in range(0, n_paths, batch):
        idx = range(start, min(n_paths, start + batch))
        x = _draw(emb, [path_seed(seed, i) for i in idx], workers)
        y = x - psi
        for a, s in enumerate(subsample):
            flags = crossing_flags(y[:, ::s], 0.0)
            per = flags.shape[1] // windows
            out[a, :, idx.start:idx.stop] = flags.reshape(len(idx), windows, per).sum(axis=2).T
    return out, emb.clipped_mass


def mc_moments(model: CovarianceModel, target, t: float, dt: float, n_paths: int, seed: int,
               *, batch: int = 64, workers: Optional[int] = None) -> McSummary:
    """Empirical mean, E[N(N-1)] and Var of crossing counts over ``n_paths`` paths."""
    counts, clipped = mc_counts(model, target, t, dt, n_paths, seed, batch=batch, workers=workers)
    stats = summarize_counts(counts[0, 0])
    return McSummary(n_paths=n_paths, target=_target_id(target), t=t, dt=dt, seed=int(seed),
                     clipped_mass=clipped, **stats)


@dataclass
class ProbeRow:
    dt: float
    variance: float
    se_variance: float
    mean_count: float
    se_mean: float


def divergence_probe(model: CovarianceModel, x, t: float, dt_sequence: Sequence[float],
                     n_paths: int, seed: int, *, batch: int = 64,
                     workers: Optional[int] = None) -> list:
    """Empirical Var(N) for each dt in ``dt_sequence``.

    When every dt is a whole multiple of the smallest, all rows are computed
    from the same paths simulated at the smallest dt and subsampled (a paired
    design with the exact law at each spacing); otherwise each dt gets its own
    ensemble.
    """
    dts = [float(d) for d in dt_sequence]
    if not dts:
        return []
    finest = min(dts)
    ratios = [d / finest for d in dts]
    paired = all(abs(q - round(q)) < 1e-9 * q for q in ratios)
    rows = []
    if paired:
        counts, _ = mc_counts(model, x, t, finest, n_paths, seed,
                              subsample=[int(round(q)) for q in ratios], batch=batch, workers=workers)
        for d, c in zip(dts, counts[:, 0]):
            s = summarize_counts(c)
            rows.append(ProbeRow(d, s["variance"], s["se_variance"], s["mean_count"], s["se_mean"]))
    else:
        for d in dts:
            m = mc_moments(model, x, t, d, n_paths, seed, batch=batch, workers=workers)
            rows.append(ProbeRow(d, m.variance, m.se_variance, m.mean_count, m.se_mean))
    return rows


__all__ = ["PathGrid", "McSummary", "ProbeRow", "EmbeddingError", "sample_path", "count_crossings",
           "crossing_flags", "mc_counts", "mc_moments", "divergence_probe", "summarize_counts",
           "splitmix64", "path_seed", "circulant_embedding"]
