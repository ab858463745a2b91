"""Euler-Maruyama integration of the two-timescale overdamped Langevin SDE.

    dx1 = -grad1 V dt + sqrt(2/beta1) dW1
    dx2 = -(1/lam) grad2 V dt + sqrt(2/(lam*beta2)) dW2

The scheme has weak order one; expect O(dt) bias in moments.  Noise comes from
``rng`` and is addressed by (seed, particle, step, component), so an ensemble run
is reproducible bit for bit for any number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .potential import Potential


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitDist:
    kind: str  # "point" or "gauss"
    values: tuple

    @classmethod
    def parse(cls, spec: str) -> "InitDist":
        try:
            kind, rest = spec.split(":", 1)
            vals = tuple(float(v) for v in rest.split(","))
        except ValueError as exc:
            raise ValueError(f"bad init spec {spec!r}; use point:x1,x2 or gauss:mean,std") from exc
        kind = kind.strip().lower()
        if kind not in ("point", "gauss"):
            raise ValueError(f"unsupported initial distribution {kind!r}")
        if kind == "gauss" and len(vals) != 2:
            raise ValueError("gauss init takes mean,std")
        return cls(kind, vals)

    def point(self, d1, d2):
        v = np.asarray(self.values, dtype=float)
        if v.size == d1 + d2:
            return v
        if v.size == 2:
            return np.concatenate([np.full(d1, v[0]), np.full(d2, v[1])])
        raise ValueError(f"point init with {v.size} values does not fit d1={d1}, d2={d2}")

    def moment(self, r, d1, d2, block="all"):
        """Exact E|x_block|^r of the initial law (used by the moment bounds)."""
        sl = dict(all=slice(0, d1 + d2), x1=slice(0, d1), x2=slice(d1, d1 + d2))[block]
        if self.kind == "point":
            return float(np.linalg.norm(self.point(d1, d2)[sl]) ** r)
        m, s = self.values
        k = len(range(d1 + d2)[sl])
        if m != 0.0:
            raise NotImplementedError("closed-form moments only for centred Gaussian init")
        # |x|^2 / s^2 ~ chi^2_k
        return float(s ** r * 2 ** (r / 2) * math.gamma((k + r) / 2) / math.gamma(k / 2))


@dataclass
class SimConfig:
    beta1: float = 1.0
    beta2: float = 2.0
    lam: float = 100.0
    dt: float = 1e-3
    t_max: float = 1.0
    n_particles: int = 10000
    seed: int = 0
    record_times: Sequence[float] = (0.0, 1.0)
    init: str = "point:1,1"
    workers: int = 1
    block_size: int = rng.DEFAULT_BLOCK
    moment_powers: Sequence[float] = (1.0, 2.0, 4.0)
    keep_snapshots: bool = False

    def __post_init__(self):
        for k in ("beta1", "beta2", "lam", "dt"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        self.record_times = tuple(sorted(float(t) for t in self.record_times))
        if not self.record_times:
            raise ValueError("record_times must be nonempty")
        if self.record_times[0] < 0 or self.record_times[-1] > self.t_max + 1e-12:
            raise ValueError("record_times must lie in [0, t_max]")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")

    @property
    def init_dist(self) -> InitDist:
        return InitDist.parse(self.init)

    @property
    def Lambda(self):
        return np.array([1.0, self.lam])

    @property
    def beta(self):
        return np.array([self.beta1, self.beta2])


@dataclass
class Ensemble:
    positions: np.ndarray
    d1: int
    d2: int
    time: float = 0.0
    step_index: int = 0
    seed: int = 0
    block_size: int = rng.DEFAULT_BLOCK

    @property
    def x1(self):
        return self.positions[:, :self.d1]

    @property
    def x2(self):
        return self.positions[:, self.d1:]


@dataclass
class TrajectoryStats:
    times: np.ndarray
    requested: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    moments: dict
    n: int
    lam: float
    snapshots: list = field(default_factory=list)

    @property
    def offsets(self):
        return self.requested - self.times

    def moment(self, block: str, r: float):
        return self.moments[(block, float(r))]


def init_ensemble(cfg: SimConfig, p: Potential) -> Ensemble:
    dist = cfg.init_dist
    d = p.d1 + p.d2
    if dist.kind == "point":
        pos = np.tile(dist.point(p.d1, p.d2), (cfg.n_particles, 1))
    else:
        m, s = dist.values
        pos = m + s * rng.init_normals(cfg.seed, cfg.n_particles, d, cfg.block_size)
    return Ensemble(pos, p.d1, p.d2, 0.0, 0, cfg.seed, cfg.block_size)


def _advance_block(pos, p, cfg, seed, step, b, lo, hi, s1, s2):
    x = pos[lo:hi]
    g1, g2 = p.grad(x[:, :p.d1], x[:, p.d1:])
    xi = rng.block_normals(seed, b, step, hi - lo, p.d1 + p.d2, cfg.block_size)
    x[:, :p.d1] += -g1 * cfg.dt + s1 * xi[:, :p.d1]
    x[:, p.d1:] += -(cfg.dt / cfg.lam) * g2 + s2 * xi[:, p.d1:]
    if not np.all(np.isfinite(x)):
        bad = lo + int(np.nonzero(~np.all(np.isfinite(x), axis=1))[0][0])
        raise IntegrationError(
            f"non-finite position for particle {bad} at step {step + 1}; try a smaller dt")


def step(e: Ensemble, p: Potential, cfg: SimConfig, pool: Optional[ThreadPoolExecutor] = None) -> Ensemble:
    """One Euler-Maruyama step, in place; returns the ensemble."""
    s1 = math.sqrt(2 * cfg.dt / cfg.beta1)
    s2 = math.sqrt(2 * cfg.dt / (cfg.lam * cfg.beta2))
    blocks = rng.block_ranges(len(e.positions), cfg.block_size)
    args = [(e.positions, p, cfg, e.seed, e.step_index, b, lo, hi, s1, s2) for b, lo, hi in blocks]
    if pool is None or len(blocks) == 1:
        for a in args:
            _advance_block(*a)
    else:
        list(pool.map(lambda a: _advance_block(*a), args))
    e.step_index += 1
    e.time = e.step_index * cfg.dt
    return e


def _norm_pow(x, r):
    sq = np.sum(x * x, axis=1)
    return sq ** (r / 2)


def ensemble_stats(pos, d1, lam, powers):
    # numpy's pairwise summation over a fixed array layout: order-fixed reduction
    n = len(pos)
    mean = pos.sum(axis=0) / n
    c = pos - mean
    cov = c.T @ c / (n - 1) if n > 1 else np.zeros((pos.shape[1],) * 2)
    x1, x2 = pos[:, :d1], pos[:, d1:]
    v = np.sum(x1 * x1, 1) / lam + np.sum(x2 * x2, 1)
    mom = {}
    for r in powers:
        r = float(r)
        mom[("x1", r)] = float(np.mean(_norm_pow(x1, r)))
        mom[("x2", r)] = float(np.mean(_norm_pow(x2, r)))
        mom[("v", r)] = float(np.mean(v ** r))
    return mean, cov, mom


def simulate(cfg: SimConfig, p: Potential, recorder: Optional[Callable] = None) -> TrajectoryStats:
    """Run from t=0 to the last record time, taking statistics at the largest grid time
    not exceeding each requested time.  ``recorder(t, positions)`` is called at each
    record time if given."""
    e = init_ensemble(cfg, p)
    req = np.array(cfg.record_times)
    idx = np.floor(req / cfg.dt + 1e-9).astype(int)
    last = int(idx.max())
    means, covs, moms, snaps, times = [], [], {}, [], []
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        j = 0
        for k in range(last + 1):
            while j < len(idx) and idx[j] == k:
                m, C, mo = ensemble_stats(e.positions, p.d1, cfg.lam, cfg.moment_powers)
                means.append(m)
                covs.append(C)
                for key, val in mo.items():
                    moms.setdefault(key, []).append(val)
                times.append(k * cfg.dt)
                if cfg.keep_snapshots:
                    snaps.append(e.positions.copy())
                if recorder is not None:
                    recorder(k * cfg.dt, e.positions)
                j += 1
            if k < last:
                step(e, p, cfg, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return TrajectoryStats(np.array(times), req, np.array(means), np.array(covs),
                           {k: np.array(v) for k, v in moms.items()}, cfg.n_particles, cfg.lam, snaps)


def lipschitz_estimate(p: Potential, positions, n_samples=20, seed=0) -> float:
    """Largest Hessian spectral norm over points sampled in the ensemble's bounding box."""
    lo, hi = positions.min(axis=0), positions.max(axis=0)
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 99], dtype=np.uint64)))
    pts = lo + (hi - lo) * g.uniform(size=(n_samples, positions.shape[1]))
    L = 0.0
    for z in pts:
        H = p.hessian(z[:p.d1], z[p.d1:])
        L = max(L, float(np.max(np.abs(np.linalg.eigvalsh(H)))))
    return L


def suggest_dt(p: Potential, positions) -> float:
    return 0.1 / max(lipschitz_estimate(p, positions), 1e-12)


# ---------------------------------------------------------------- generator

@dataclass
class TestFunction:
    """phi with value, block gradients and block Laplacians (all vectorised)."""
    value: Callable
    grad: Optional[Callable] = None
    lap: Optional[Callable] = None

    __test__ = False  # not a pytest class


def monomial(i: int, j: int) -> TestFunction:
    """phi(x, y) = x^i y^j in 1+1 dimensions."""
    def val(x1, x2):
        return x1[..., 0] ** i * x2[..., 0] ** j

    def grad(x1, x2):
        x, y = x1[..., 0], x2[..., 0]
        gx = i * x ** max(i - 1, 0) * y ** j if i else np.zeros_like(x * y)
        gy = j * y ** max(j - 1, 0) * x ** i if j else np.zeros_like(x * y)
        return gx[..., None], gy[..., None]

    def lap(x1, x2):
        x, y = x1[..., 0], x2[..., 0]
        lx = i * (i - 1) * x ** max(i - 2, 0) * y ** j if i > 1 else np.zeros_like(x * y)
        ly = j * (j - 1) * y ** max(j - 2, 0) * x ** i if j > 1 else np.zeros_like(x * y)
        return lx, ly

    return TestFunction(val, grad, lap)


def _fd_grad_lap(phi, x1, x2, h=1e-4):
    x1 = np.array(x1, dtype=float)
    x2 = np.array(x2, dtype=float)
    f0 = phi(x1, x2)
    g1 = np.zeros(x1.shape)
    g2 = np.zeros(x2.shape)
    l1 = np.zeros(np.shape(f0))
    l2 = np.zeros(np.shape(f0))
    for blk, x, g, l in ((1, x1, g1, l1), (2, x2, g2, l2)):
        for k in range(x.shape[-1]):
            e = np.zeros(x.shape[-1]); e[k] = h
            fp = phi(x1 + e, x2) if blk == 1 else phi(x1, x2 + e)
            fm = phi(x1 - e, x2) if blk == 1 else phi(x1, x2 - e)
            g[..., k] = (fp - fm) / (2 * h)
            l += (fp - 2 * f0 + fm) / (h * h)
    return (g1, g2), (l1, l2)


def apply_generator(p: Potential, cfg: SimConfig, phi, x1, x2):
    """(1/beta1 lap1 phi - grad1 phi . grad1 V) + (1/lam)(1/beta2 lap2 phi - grad2 phi . grad2 V)."""
    if not isinstance(phi, TestFunction):
        phi = TestFunction(phi)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.ndim == 0:
        x1 = x1[None]
    if x2.ndim == 0:
        x2 = x2[None]
    if phi.grad is None or phi.lap is None:
        (f1, f2), (l1, l2) = _fd_grad_lap(phi.value, x1, x2)
    else:
        f1, f2 = phi.grad(x1, x2)
        l1, l2 = phi.lap(x1, x2)
    V1, V2 = p.grad(x1, x2)
    fast = l1 / cfg.beta1 - np.sum(f1 * V1, axis=-1)
    slow = l2 / cfg.beta2 - np.sum(f2 * V2, axis=-1)
    return fast + slow / cfg.lam
