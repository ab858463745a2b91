"""Potential families with derivatives and convex + bounded splits.

Coordinates are split into a fast block ``x1`` (dimension ``d1``) and a slow
block ``x2`` (dimension ``d2``).  ``eval`` and ``grad`` broadcast over leading
axes, so an ensemble of shape ``(n, d1)`` / ``(n, d2)`` is evaluated in one call.
``hessian_blocks`` works on a single point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize


class PotentialError(ValueError):
    pass


class CertificationError(RuntimeError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


@dataclass(frozen=True)
class PolyBound:
    """f(x1, x2) <= g0 + g1 |x1|^r1 + g2 |x2|^r2."""
    g0: float = 0.0
    g1: float = 0.0
    r1: float = 0.0
    g2: float = 0.0
    r2: float = 0.0


@dataclass(frozen=True)
class GrowthMetadata:
    """Polynomial growth and confinement constants consumed by the moment bounds.

    Lower sandwich: a1s|x1|^2 + a2s|x2|^2 - a0s <= V.
    Upper sandwich: V <= g1|x1|^m1 + g2|x2|^m2 + g0.
    Radial confinement: x.grad V >= a|x|^2 - a0.
    Fast confinement: x1.grad1 V >= b1|x1|^2 - b2|x2|^p - b0.
    """
    a1s: float
    a2s: float
    a0s: float
    g1: float
    g2: float
    g0: float
    m1: float
    m2: float
    a: float
    a0: float
    b1: float
    b2: float
    b0: float
    p: float
    grad2_sq: PolyBound
    grad2_4th: PolyBound
    lap2_abs: PolyBound


def _split(x1, x2, d1, d2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.ndim == 0:
        x1 = x1[None]
    if x2.ndim == 0:
        x2 = x2[None]
    if x1.shape[-1] != d1 or x2.shape[-1] != d2:
        raise PotentialError(
            f"dimension mismatch: got x1[..., {x1.shape[-1]}], x2[..., {x2.shape[-1]}], "
            f"expected d1={d1}, d2={d2}")
    return x1, x2


class Potential:
    """Base class. Subclasses implement ``_eval``, ``_grad`` and ``_hess``."""

    kind = "abstract"
    d1: int
    d2: int

    def eval(self, x1, x2):
        x1, x2 = _split(x1, x2, self.d1, self.d2)
        return self._eval(x1, x2)

    def grad(self, x1, x2):
        x1, x2 = _split(x1, x2, self.d1, self.d2)
        return self._grad(x1, x2)

    def hessian_blocks(self, x1, x2):
        x1, x2 = _split(x1, x2, self.d1, self.d2)
        if x1.ndim != 1 or x2.ndim != 1:
            raise PotentialError("hessian_blocks expects a single point")
        return self._hess(x1, x2)

    def hessian(self, x1, x2):
        H11, H12, H22 = self.hessian_blocks(x1, x2)
        return np.block([[H11, H12], [H12.T, H22]])

    # convex + bounded split; default: V is its own convex part
    def convex_hessian_blocks(self, x1, x2):
        return self.hessian_blocks(x1, x2)

    def osc_bounded_part(self) -> float:
        return 0.0

    def growth(self) -> Optional[GrowthMetadata]:
        return None

    # (laplacian in the slow block) used by generic c0 evaluation
    def lap2(self, x1, x2):
        x1, x2 = _split(x1, x2, self.d1, self.d2)
        out = np.empty(np.broadcast_shapes(x1.shape[:-1], x2.shape[:-1]))
        for idx in np.ndindex(out.shape):
            a = np.broadcast_to(x1, out.shape + (self.d1,))[idx]
            b = np.broadcast_to(x2, out.shape + (self.d2,))[idx]
            out[idx] = np.trace(self._hess(a, b)[2])
        return out


# ---------------------------------------------------------------- quadratic

@dataclass(frozen=True)
class QuadraticParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a > 0:
            raise PotentialError("quadratic potential needs a > 0")
        if not self.a * self.b - self.c ** 2 > 0:
            raise PotentialError("quadratic potential needs det A = ab - c^2 > 0")

    @property
    def det(self):
        return self.a * self.b - self.c ** 2

    @property
    def matrix(self):
        return np.array([[self.a, self.c], [self.c, self.b]])


class Quadratic(Potential):
    """V = 1/2 (x, y) A (x, y)^T with A = [[a, c], [c, b]]."""

    kind = "quadratic"

    def __init__(self, a=2.0, b=1.0, c=0.5):
        self.params = QuadraticParams(float(a), float(b), float(c))
        self.a, self.b, self.c = self.params.a, self.params.b, self.params.c
        self.d1 = self.d2 = 1

    @property
    def A(self):
        return self.params.matrix

    def _eval(self, x1, x2):
        x, y = x1[..., 0], x2[..., 0]
        return 0.5 * (self.a * x * x + 2 * self.c * x * y + self.b * y * y)

    def _grad(self, x1, x2):
        x, y = x1, x2
        return self.a * x + self.c * y, self.c * x + self.b * y

    def _hess(self, x1, x2):
        return (np.array([[self.a]]), np.array([[self.c]]), np.array([[self.b]]))

    def lap2(self, x1, x2):
        x1, x2 = _split(x1, x2, 1, 1)
        return np.full(np.broadcast_shapes(x1.shape[:-1], x2.shape[:-1]), self.b)

    def growth(self):
        a, b, c = self.a, self.b, self.c
        lmin = float(np.linalg.eigvalsh(self.A)[0])
        return GrowthMetadata(
            a1s=lmin / 2, a2s=lmin / 2, a0s=0.0,
            g1=(a + abs(c)) / 2, g2=(b + abs(c)) / 2, g0=0.0, m1=2.0, m2=2.0,
            a=lmin, a0=0.0,
            # a x^2 + c x y >= (a/2) x^2 - c^2/(2a) y^2
            b1=a / 2, b2=c * c / (2 * a), b0=0.0, p=2.0,
            grad2_sq=PolyBound(0.0, 2 * c * c, 2.0, 2 * b * b, 2.0),
            grad2_4th=PolyBound(0.0, 8 * c ** 4, 4.0, 8 * b ** 4, 4.0),
            lap2_abs=PolyBound(abs(b), 0.0, 0.0, 0.0, 0.0),
        )


# ---------------------------------------------------------- generic callable

class FunctionPotential(Potential):
    """Potential from a vectorised callable V(x1, x2); derivatives by central differences
    unless ``grad_fn`` is given."""

    kind = "function"

    def __init__(self, fn: Callable, d1: int, d2: int, grad_fn: Optional[Callable] = None,
                 h: float = 1e-5):
        self.fn, self.grad_fn = fn, grad_fn
        self.d1, self.d2, self.h = d1, d2, h

    def _eval(self, x1, x2):
        return np.asarray(self.fn(x1, x2), dtype=float)

    def _grad(self, x1, x2):
        if self.grad_fn is not None:
            return self.grad_fn(x1, x2)
        x1 = np.array(x1, dtype=float)
        x2 = np.array(x2, dtype=float)
        g1 = np.zeros(np.broadcast_shapes(x1.shape[:-1], x2.shape[:-1]) + (self.d1,))
        g2 = np.zeros(g1.shape[:-1] + (self.d2,))
        h = self.h
        for i in range(self.d1):
            e = np.zeros(self.d1); e[i] = h
            g1[..., i] = (self.fn(x1 + e, x2) - self.fn(x1 - e, x2)) / (2 * h)
        for j in range(self.d2):
            e = np.zeros(self.d2); e[j] = h
            g2[..., j] = (self.fn(x1, x2 + e) - self.fn(x1, x2 - e)) / (2 * h)
        return g1, g2

    def _hess(self, x1, x2):
        d = self.d1 + self.d2
        z = np.concatenate([x1, x2])
        h = 1e-4
        H = np.zeros((d, d))
        for k in range(d):
            e = np.zeros(d); e[k] = h
            gp = np.concatenate(self._grad((z + e)[:self.d1], (z + e)[self.d1:]))
            gm = np.concatenate(self._grad((z - e)[:self.d1], (z - e)[self.d1:]))
            H[:, k] = (gp - gm) / (2 * h)
        H = 0.5 * (H + H.T)
        return H[:self.d1, :self.d1], H[:self.d1, self.d1:], H[self.d1:, self.d1:]


# ------------------------------------------------------------ smoothing eta

X0 = (1 + np.sqrt(5)) / 2
DELTA_ETA = 0.1


def _eta_coeffs():
    """Quintic in t = (x - X0)/DELTA_ETA matching value, slope and curvature at both ends."""
    L, R = X0 - DELTA_ETA, X0 + DELTA_ETA
    d = DELTA_ETA
    # value / first / second derivative of x^2 at L and of (x^2-1)^2 at R, rescaled to t
    targets = [L * L, 2 * L * d, 2.0 * d * d,
               (R * R - 1) ** 2, (4 * R ** 3 - 4 * R) * d, (12 * R * R - 4) * d * d]
    rows = []
    for t in (-1.0, 1.0):
        rows.append([t ** k for k in range(6)])
        rows.append([k * t ** (k - 1) if k >= 1 else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * t ** (k - 2) if k >= 2 else 0.0 for k in range(6)])
    return np.linalg.solve(np.array(rows), np.array(targets))


_ETA_C = _eta_coeffs()
_ETA_D1 = np.polynomial.polynomial.polyder(_ETA_C) / DELTA_ETA
_ETA_D2 = np.polynomial.polynomial.polyder(_ETA_C, 2) / DELTA_ETA ** 2


def smoothing_eta(x):
    """C^2 even function equal to x^2 near 0 and (x^2-1)^2 far out.

    Returns (value, first derivative, second derivative); vectorised.
    """
    x = np.asarray(x, dtype=float)
    s = np.sign(x)
    u = np.abs(x)
    L, R = X0 - DELTA_ETA, X0 + DELTA_ETA
    inner, outer = u < L, u > R
    t = (u - X0) / DELTA_ETA
    P = np.polynomial.polynomial.polyval
    v = np.where(inner, u * u, np.where(outer, (u * u - 1) ** 2, P(t, _ETA_C)))
    d1 = np.where(inner, 2 * u, np.where(outer, 4 * u ** 3 - 4 * u, P(t, _ETA_D1)))
    d2 = np.where(inner, 2.0, np.where(outer, 12 * u * u - 4, P(t, _ETA_D2)))
    d1 = s * d1
    if np.ndim(x) == 0:
        return float(v), float(d1), float(d2)
    return v, d1, d2


def _vb_profile_osc():
    """sup - inf of (x^2-1)^2 - eta(x) over the real line (compact support)."""
    xs = np.linspace(0, X0 + DELTA_ETA + 0.5, 200001)
    g = (xs * xs - 1) ** 2 - smoothing_eta(xs)[0]
    return float(g.max() - g.min())


VB_PROFILE_OSC = _vb_profile_osc()


# ------------------------------------------------------------- spin glass

def sample_spin_glass_disorder(seed: int, N: int) -> np.ndarray:
    """N x N matrix of iid standard normals, a pure function of (seed, N)."""
    if N < 1:
        raise PotentialError("N must be >= 1")
    g = np.random.Generator(np.random.Philox(key=np.array([seed, N], dtype=np.uint64)))
    return g.standard_normal((N, N))


@dataclass
class SoftSpinGlassParams:
    N: int
    Delta: float
    Delta0: float
    Aq: float
    B: float
    J: np.ndarray
    tau: float = 0.5

    def __post_init__(self):
        for k in ("Delta", "Delta0", "Aq", "B"):
            if not getattr(self, k) > 0:
                raise PotentialError(f"{k} must be positive")
        self.J = np.asarray(self.J, dtype=float)
        if self.J.shape != (self.N, self.N) or not np.all(np.isfinite(self.J)):
            raise PotentialError("J must be a finite N x N matrix")


class SoftSpinGlass(Potential):
    """Fast soft spins s, slow fields y:

    V = -sqrt(Delta)/(2 sqrt(N)) s.J.s - sqrt(Delta0) y.s + Aq/2 sum (s^2-1)^2 + B/2 |y|^2
    """

    kind = "spin-glass"

    def __init__(self, params: SoftSpinGlassParams):
        self.params = params
        self.d1 = self.d2 = params.N
        self._k = np.sqrt(params.Delta) / (2 * np.sqrt(params.N))
        self._Jsym = params.J + params.J.T
        self._r0 = np.sqrt(params.Delta0)

    @classmethod
    def from_seed(cls, seed, N=20, Delta=1.0, Delta0=1.0, Aq=10.0, B=1.0, tau=0.5):
        J = sample_spin_glass_disorder(seed, N)
        return cls(SoftSpinGlassParams(N, Delta, Delta0, Aq, B, J, tau))

    def _eval(self, s, y):
        p = self.params
        pair = np.einsum("...i,ij,...j->...", s, p.J, s)
        return (-self._k * pair - self._r0 * np.sum(y * s, axis=-1)
                + 0.5 * p.Aq * np.sum((s * s - 1) ** 2, axis=-1)
                + 0.5 * p.B * np.sum(y * y, axis=-1))

    def _grad(self, s, y):
        p = self.params
        gs = -self._k * s @ self._Jsym.T - self._r0 * y + 2 * p.Aq * s * (s * s - 1)
        gy = -self._r0 * s + p.B * y
        return gs, gy

    def _hess(self, s, y):
        p = self.params
        N = p.N
        H11 = -self._k * self._Jsym + np.diag(p.Aq * (6 * s * s - 2))
        return H11, -self._r0 * np.eye(N), p.B * np.eye(N)

    def convex_hessian_blocks(self, s, y):
        s, y = _split(s, y, self.d1, self.d2)
        p = self.params
        H11 = -self._k * self._Jsym + np.diag(0.5 * p.Aq * smoothing_eta(s)[2])
        return H11, -self._r0 * np.eye(p.N), p.B * np.eye(p.N)

    def bounded_part(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * self.params.Aq * np.sum((s * s - 1) ** 2 - smoothing_eta(s)[0], axis=-1)

    def osc_bounded_part(self):
        # per-spin profile oscillation is computed from the interpolant
        return 0.5 * self.params.Aq * self.params.N * VB_PROFILE_OSC

    def osc_bounded_part_nominal(self):
        return 0.5 * self.params.Aq * self.params.N

    def lap2(self, s, y):
        s, y = _split(s, y, self.d1, self.d2)
        return np.full(np.broadcast_shapes(s.shape[:-1], y.shape[:-1]), self.params.B * self.params.N)


# -------------------------------------------------------------- rank one

def sample_rank_one_data(seed: int, N1: int, N2: int, Delta: float, prior: str = "rademacher"):
    """Latent vectors from the prior and J = sqrt(Delta/N) u* v*^T + Z, N = N1 + N2."""
    if N1 < 1 or N2 < 1:
        raise PotentialError("N1, N2 must be >= 1")
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 1_000_003], dtype=np.uint64)))
    prior = prior.lower().replace("_", "").replace("-", "")
    if prior == "rademacher":
        u = g.choice([-1.0, 1.0], size=N1)
        v = g.choice([-1.0, 1.0], size=N2)
    elif prior in ("standardgaussian", "gaussian"):
        u = g.standard_normal(N1)
        v = g.standard_normal(N2)
    else:
        raise PotentialError(f"unknown prior {prior!r}")
    Z = g.standard_normal((N1, N2))
    J = np.sqrt(Delta / (N1 + N2)) * np.outer(u, v) + Z
    return u, v, J


@dataclass
class RankOneParams:
    N1: int
    N2: int
    Delta: float
    a: float
    b: float
    A: float
    B: float
    J: np.ndarray
    uStar: Optional[np.ndarray] = None
    vStar: Optional[np.ndarray] = None

    def __post_init__(self):
        for k in ("a", "b", "A", "B", "Delta"):
            if not getattr(self, k) > 0:
                raise PotentialError(f"{k} must be positive")
        self.J = np.asarray(self.J, dtype=float)
        if self.J.shape != (self.N1, self.N2):
            raise PotentialError("J must be N1 x N2")

    @property
    def gamma(self):
        return self.N1 / (self.N1 + self.N2)


class RankOneInference(Potential):
    """Fast u, slow v:

    V = 1/2 sum (J_ij - sqrt(Delta/N) u_i v_j)^2 + sum(a/2 u^2 + A/12 u^4) + sum(b/2 v^2 + B/12 v^4)
    """

    kind = "rank-one"

    def __init__(self, params: RankOneParams):
        self.params = params
        self.d1, self.d2 = params.N1, params.N2
        self._k = np.sqrt(params.Delta / (params.N1 + params.N2))

    @classmethod
    def from_seed(cls, seed, N1, N2, Delta, a, b, A, B, prior="rademacher"):
        u, v, J = sample_rank_one_data(seed, N1, N2, Delta, prior)
        return cls(RankOneParams(N1, N2, Delta, a, b, A, B, J, u, v))

    def _resid(self, u, v):
        return self.params.J - self._k * u[..., :, None] * v[..., None, :]

    def _eval(self, u, v):
        p = self.params
        R = self._resid(u, v)
        return (0.5 * np.sum(R * R, axis=(-2, -1))
                + np.sum(0.5 * p.a * u * u + p.A / 12 * u ** 4, axis=-1)
                + np.sum(0.5 * p.b * v * v + p.B / 12 * v ** 4, axis=-1))

    def _grad(self, u, v):
        p = self.params
        R = self._resid(u, v)
        gu = -self._k * np.einsum("...ij,...j->...i", R, v) + p.a * u + p.A / 3 * u ** 3
        gv = -self._k * np.einsum("...ij,...i->...j", R, u) + p.b * v + p.B / 3 * v ** 3
        return gu, gv

    def _hess(self, u, v):
        p, k = self.params, self._k
        H11 = k * k * (v @ v) * np.eye(p.N1) + np.diag(p.a + p.A * u * u)
        H22 = k * k * (u @ u) * np.eye(p.N2) + np.diag(p.b + p.B * v * v)
        H12 = -k * p.J + 2 * k * k * np.outer(u, v)
        return H11, H12, H22


# ------------------------------------------------------------- factory

def make_potential(kind: str, **kw) -> Potential:
    kind = kind.lower().replace("_", "-")
    if kind == "quadratic":
        return Quadratic(kw.get("a", 2.0), kw.get("b", 1.0), kw.get("c", 0.5))
    if kind in ("spin-glass", "softspinglass", "soft-spin-glass"):
        return SoftSpinGlass.from_seed(int(kw.get("seed_disorder", 0)), int(kw.get("N", 20)),
                                       kw.get("delta", 1.0), kw.get("delta0", 1.0),
                                       kw.get("Aq", 10.0), kw.get("B", 1.0), kw.get("tau", 0.5))
    if kind in ("rank-one", "rankone", "rankoneinference"):
        return RankOneInference.from_seed(int(kw.get("seed_disorder", 0)), int(kw.get("N1", 20)),
                                          int(kw.get("N2", 20)), kw.get("delta", 0.1),
                                          kw.get("a", 3.0), kw.get("b", 3.0), kw.get("Aq", 1.0),
                                          kw.get("B", 1.0), kw.get("prior", "rademacher"))
    raise PotentialError(f"unknown potential kind {kind!r}")


# ------------------------------------------------------- confinement fit

@dataclass
class ConfinementReport:
    """Sampled (non-rigorous) fit of the confinement constants."""
    a: float
    a0: float
    A3: dict
    A4: dict
    A5: dict
    violations: list = field(default_factory=list)
    rigorous: bool = False


def _sample_box(p: Potential, box, n, seed):
    g = np.random.Generator(np.random.Philox(key=np.array([seed, 77], dtype=np.uint64)))
    hw = np.broadcast_to(np.asarray(box, dtype=float), (p.d1 + p.d2,))
    z = g.uniform(-1, 1, size=(n, p.d1 + p.d2)) * hw
    return z[:, :p.d1], z[:, p.d1:]


def _lp_fit(c1, c2, rhs, sign2=1.0, w0=10.0):
    """Largest a1, a2 and smallest a0 with a1*c1 + sign2*a2*c2 - a0 <= rhs on all samples.

    sign2=+1 fits a1|x1|^2 + a2|x2|^2 - a0 <= rhs; sign2=-1 fits a1|x1|^2 - a2|x2|^p - a0 <= rhs.
    """
    from scipy.optimize import linprog
    A_ub = np.column_stack([c1, sign2 * c2, -np.ones_like(c1)])
    res = linprog(c=[-1.0, -sign2, w0], A_ub=A_ub, b_ub=rhs,
                  bounds=[(None, None), (0, None), (0, None)], method="highs")
    if not res.success:
        return dict(a1=np.nan, a2=np.nan, a0=np.nan)
    a1, a2, a0 = res.x
    return dict(a1=float(a1), a2=float(a2), a0=float(a0))


def check_confinement(p: Potential, box=3.0, n=20000, seed=0, p_exp=2.0) -> ConfinementReport:
    """Fit (A3) V >= a1|x1|^2 + a2|x2|^2 - a0, (A4) x.gradV >= a|x|^2 - a0 (and its block form),
    (A5) x1.grad1V >= a1|x1|^2 - a2|x2|^p - a0 on sampled points of a box.

    Advisory only: constants hold on the samples, not globally.
    """
    x1, x2 = _sample_box(p, box, n, seed)
    V = p.eval(x1, x2)
    g1, g2 = p.grad(x1, x2)
    q1 = np.sum(x1 * x1, -1)
    q2 = np.sum(x2 * x2, -1)
    xg1 = np.sum(x1 * g1, -1)
    xg = xg1 + np.sum(x2 * g2, -1)

    # radial (A4): a = min ratio away from the origin, refined by local minimisation
    r2 = q1 + q2
    far = r2 > 0.25 * np.max(r2)
    ratio = xg[far] / r2[far]
    a = float(ratio.min())
    d = p.d1 + p.d2
    z_best = np.concatenate([x1[far], x2[far]], axis=1)[np.argsort(ratio)[:10]]

    def f(z):
        z1, z2 = z[:p.d1], z[p.d1:]
        gg1, gg2 = p.grad(z1, z2)
        return (z1 @ gg1 + z2 @ gg2) / max(z @ z, 1e-300)

    for z in z_best:
        res = optimize.minimize(f, z, method="Nelder-Mead",
                                options=dict(xatol=1e-10, fatol=1e-12, maxiter=400 * d))
        if np.max(np.abs(res.x)) <= np.max(box) + 1e-12 and res.x @ res.x > 1e-8:
            a = min(a, float(res.fun))
    a0 = float(max(0.0, np.max(a * r2 - xg)))

    A3 = _lp_fit(q1, q2, V)
    A4 = _lp_fit(q1, q2, xg)
    A5 = _lp_fit(q1, np.sum(np.abs(x2) ** 2, -1) ** (p_exp / 2), xg1, sign2=-1.0)
    A5["p"] = p_exp

    violations = []
    meta = p.growth()
    if meta is not None:
        lhs = meta.a1s * q1 + meta.a2s * q2 - meta.a0s
        bad = np.nonzero(V < lhs - 1e-9 * (1 + np.abs(V)))[0]
        if bad.size:
            violations.append(("A3", x1[bad[0]], x2[bad[0]]))
        bad = np.nonzero(xg < meta.a * r2 - meta.a0 - 1e-9 * (1 + np.abs(xg)))[0]
        if bad.size:
            violations.append(("A4", x1[bad[0]], x2[bad[0]]))
        rhs5 = meta.b1 * q1 - meta.b2 * q2 ** (meta.p / 2) - meta.b0
        bad = np.nonzero(xg1 < rhs5 - 1e-9 * (1 + np.abs(xg1)))[0]
        if bad.size:
            violations.append(("A5", x1[bad[0]], x2[bad[0]]))
    return ConfinementReport(a=a, a0=a0, A3=A3, A4=A4, A5=A5, violations=violations)


# ------------------------------------------------------ convex + bounded

@dataclass
class ConvexBoundedSplit:
    oscVb: float
    alpha: float
    alpha1: float
    alpha2: float
    witness: dict = field(default_factory=dict)
    n_points: int = 0


def _block_constants(p: Potential, z):
    H11, H12, H22 = p.convex_hessian_blocks(z[:p.d1], z[p.d1:])
    l11 = np.linalg.eigvalsh(H11)[0]
    if l11 <= 0:
        return l11, -np.inf, -np.inf
    S = H22 - H12.T @ np.linalg.solve(H11, H12)
    ls = np.linalg.eigvalsh(0.5 * (S + S.T))[0]
    lf = np.linalg.eigvalsh(np.block([[H11, H12], [H12.T, H22]]))[0]
    return l11, ls, lf


def certify_split(p: Potential, box=2.0, n=2000, seed=0, restarts=10) -> ConvexBoundedSplit:
    """Sampled certification of the strongly convex part: minimum eigenvalues of H11,
    of the Schur complement H22 - H12^T H11^-1 H12 and of the full Hessian."""
    x1, x2 = _sample_box(p, box, n, seed)
    Z = np.concatenate([x1, x2], axis=1)
    vals = np.array([_block_constants(p, z) for z in Z])
    if np.any(vals[:, 0] <= 0):
        i = int(np.argmin(vals[:, 0]))
        raise CertificationError("fast Hessian block of the convex part is not positive definite",
                                 witness=Z[i])
    hw = np.broadcast_to(np.asarray(box, dtype=float), (Z.shape[1],))
    best = []
    for col in range(3):
        i = int(np.argmin(vals[:, col]))
        val, wz = vals[i, col], Z[i]
        for j in np.argsort(vals[:, col])[:restarts]:
            res = optimize.minimize(lambda z: _block_constants(p, np.clip(z, -hw, hw))[col], Z[j],
                                    method="Nelder-Mead", options=dict(maxiter=200))
            if res.fun < val:
                val, wz = float(res.fun), np.clip(res.x, -hw, hw)
        best.append((val, wz))
    (a1, w1), (a2, w2), (af, wf) = best
    if a1 <= 0:
        raise CertificationError("fast Hessian block of the convex part is not positive definite",
                                 witness=w1)
    return ConvexBoundedSplit(oscVb=p.osc_bounded_part(), alpha=af, alpha1=a1, alpha2=a2,
                              witness=dict(alpha1=w1, alpha2=w2, alpha=wf), n_points=n)
