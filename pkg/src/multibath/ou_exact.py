"""Exact two-temperature Ornstein-Uhlenbeck solution for V = 1/2 z^T A z, d1 = d2 = 1.

With Gamma = [[a, c], [c/lam, b/lam]] and diffusion D = diag(2/beta1, 2/(lam beta2)),
the law at time t from a point mass z0 is N(mu(t), Omega(t)) with

    mu(t)    = exp(-t Gamma) z0
    Omega(t) = int_0^t exp(-s Gamma) D exp(-s Gamma^T) ds.

In the eigenbasis P = [[1, 1], [v1, v2]], v_i = (gamma_i - a)/c, the covariance is
P K(t) P^T with K_ij = Q_ij (1 - exp(-(gamma_i + gamma_j) t)) / (gamma_i + gamma_j) and
Q = P^-1 D P^-T = [[r1, -r12], [-r12, r2]]: a constant plus three exponentials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .potential import QuadraticParams


class DegenerateMeasureError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))

    def logpdf(self, x1, x2):
        z = np.stack([np.asarray(x1, float), np.asarray(x2, float)], axis=-1) - self.mean
        Ci = np.linalg.inv(self.cov)
        q = np.einsum("...i,ij,...j->...", z, Ci, z)
        return -0.5 * q - 0.5 * np.log((2 * np.pi) ** 2 * np.linalg.det(self.cov))

    def pdf(self, x1, x2):
        return np.exp(self.logpdf(x1, x2))


@dataclass(frozen=True)
class CondMarg:
    condSlope: float
    condVar: float
    margMean: float
    margVar: float
    condIntercept: float = 0.0  # conditional mean = intercept + slope * x2


@dataclass(frozen=True)
class OUSystem:
    a: float
    b: float
    c: float
    beta1: float
    beta2: float
    lam: float
    Gamma: np.ndarray
    Ddiff: np.ndarray
    gamma1: float
    gamma2: float
    v1: float
    v2: float
    r1: float
    r2: float
    r12: float
    Sigma: np.ndarray       # covariance of the limiting stationary measure
    Sigma_inf: np.ndarray   # stationary covariance of the OU process at this lam
    branch: str             # "coupled", "decoupled" or "degenerate"

    @property
    def det(self):
        return self.a * self.b - self.c ** 2

    @property
    def D(self):
        return self.Ddiff @ self.Ddiff.T


def gaussian_stationary(q: QuadraticParams, beta1: float, beta2: float) -> GaussianMeasure:
    """Centred Gaussian: conditional Gibbs at beta1 for x given y, marginal Gibbs of the
    effective potential at beta2 for y."""
    a, b, c = q.a, q.b, q.c
    det = a * b - c * c
    S = np.array([
        [1 / (beta1 * a) + (1 / beta2) * (c * c / (a * a)) * (a / det), -(1 / beta2) * (c / a) * (a / det)],
        [-(1 / beta2) * (c / a) * (a / det), (1 / beta2) * (a / det)],
    ])
    return GaussianMeasure(np.zeros(2), S)


def build(q: QuadraticParams, beta1: float, beta2: float, lam: float) -> OUSystem:
    a, b, c = q.a, q.b, q.c
    det = a * b - c * c
    G = np.array([[a, c], [c / lam, b / lam]])
    Dd = np.diag([math.sqrt(2 / beta1), math.sqrt(2 / (lam * beta2))])
    tr = a + b / lam
    # (a + b/lam)^2 - 4 det/lam rewritten without cancellation
    disc2 = (a - b / lam) ** 2 + 4 * c * c / lam
    if disc2 < 0:
        raise ValueError("complex eigenvalues: underdamped regime not supported")
    disc = math.sqrt(disc2)
    g1 = 0.5 * (tr + disc)
    g2 = (det / lam) / g1
    Sigma = gaussian_stationary(q, beta1, beta2).cov
    d1, d2 = 2 / beta1, 2 / (lam * beta2)

    if abs(c) < 1e-100 * math.sqrt(a * b):
        # decoupled (a coupling this small is below double precision in every output): independent 1-D OU processes (eigenvalues listed as gamma1 >= gamma2)
        Sinf = np.diag([1 / (beta1 * a), 1 / (beta2 * b)])
        return OUSystem(a, b, c, beta1, beta2, lam, G, Dd, max(a, b / lam), min(a, b / lam),
                        np.nan, np.nan, np.nan, np.nan, np.nan, Sigma, Sinf, "decoupled")

    if g1 - g2 < 1e-10 * g1:
        Sinf = linalg.solve_continuous_lyapunov(G, Dd @ Dd.T)
        return OUSystem(a, b, c, beta1, beta2, lam, G, Dd, g1, g2, np.nan, np.nan,
                        np.nan, np.nan, np.nan, Sigma, 0.5 * (Sinf + Sinf.T), "degenerate")

    def v_of(g):
        # (g - a)/c == (c/lam)/(g - b/lam); use the better-conditioned form
        num1, num2 = g - a, g - b / lam
        return num1 / c if abs(num1) >= abs(num2) else (c / lam) / num2

    v1, v2 = v_of(g1), v_of(g2)
    w = 2 / (v2 - v1) ** 2
    r1 = w * (v2 * v2 / beta1 + 1 / (lam * beta2))
    r2 = w * (v1 * v1 / beta1 + 1 / (lam * beta2))
    r12 = w * (v1 * v2 / beta1 + 1 / (lam * beta2))
    del d1, d2
    sys = OUSystem(a, b, c, beta1, beta2, lam, G, Dd, g1, g2, v1, v2, r1, r2, r12,
                   Sigma, np.zeros((2, 2)), "coupled")
    object.__setattr__(sys, "Sigma_inf", _coupled_cov(sys, np.inf))
    return sys


def _one_minus_exp(k, t):
    if np.isinf(t):
        return 1.0
    return -math.expm1(-k * t)


def _coupled_cov(s: OUSystem, t: float) -> np.ndarray:
    g1, g2, v1, v2 = s.gamma1, s.gamma2, s.v1, s.v2
    K11 = s.r1 * _one_minus_exp(2 * g1, t) / (2 * g1)
    K22 = s.r2 * _one_minus_exp(2 * g2, t) / (2 * g2)
    K12 = -s.r12 * _one_minus_exp(g1 + g2, t) / (g1 + g2)
    O11 = K11 + 2 * K12 + K22
    O12 = v1 * K11 + (v1 + v2) * K12 + v2 * K22
    O22 = v1 * v1 * K11 + 2 * v1 * v2 * K12 + v2 * v2 * K22
    return np.array([[O11, O12], [O12, O22]])


def expm_neg(s: OUSystem, t: float) -> np.ndarray:
    """exp(-t Gamma) in closed form."""
    if s.branch == "coupled":
        e1, e2 = math.exp(-s.gamma1 * t), math.exp(-s.gamma2 * t)
        v1, v2 = s.v1, s.v2
        P = np.array([[1.0, 1.0], [v1, v2]])
        Pinv = np.array([[v2, -1.0], [-v1, 1.0]]) / (v2 - v1)
        return P @ np.diag([e1, e2]) @ Pinv
    if s.branch == "decoupled":
        return np.diag([math.exp(-s.a * t), math.exp(-s.b / s.lam * t)])
    # nearly repeated eigenvalue: exp(-tG) = e^{-m t} (cosh(dt) I - sinh(dt)/d (G - m I))
    m = 0.5 * np.trace(s.Gamma)
    d = 0.5 * (s.gamma1 - s.gamma2)
    x = d * t
    shc = 1 + x * x / 6 + x ** 4 / 120 if abs(x) < 1e-3 else math.sinh(x) / x
    return math.exp(-m * t) * (math.cosh(x) * np.eye(2) - t * shc * (s.Gamma - m * np.eye(2)))


def mean_at(s: OUSystem, t: float, x0: float, y0: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.array([x0, y0], dtype=float)
    return expm_neg(s, t) @ np.array([x0, y0], dtype=float)


def covariance_at(s: OUSystem, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be >= 0")
    if s.branch == "coupled":
        return _coupled_cov(s, t)
    if s.branch == "decoupled":
        k1, k2 = s.a, s.b / s.lam
        return np.diag([_one_minus_exp(2 * k1, t) / (s.beta1 * k1),
                        _one_minus_exp(2 * k2, t) / (s.beta2 * s.b)])
    E = expm_neg(s, t)
    O = s.Sigma_inf - E @ s.Sigma_inf @ E.T
    return 0.5 * (O + O.T)


def covariance_quadrature(s: OUSystem, t: float, n_nodes: int = 24) -> np.ndarray:
    """Composite Gauss-Legendre quadrature of int_0^t e^{-uG} D e^{-uG^T} du with
    matrix exponentials from scipy; geometric panels resolve the fast decay near u=0."""
    if t <= 0:
        return np.zeros((2, 2))
    G, D = s.Gamma, s.D
    h0 = min(t, 0.25 / max(s.gamma1, 1e-300))
    edges = [0.0, h0]
    while edges[-1] < t:
        edges.append(min(t, 2 * edges[-1]))
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    us, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        us.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * wg)
    u = np.concatenate(us)
    w = np.concatenate(ws)
    E = linalg.expm(-u[:, None, None] * G[None])
    integrand = E @ D @ np.transpose(E, (0, 2, 1))
    O = np.einsum("k,kij->ij", w, integrand)
    return 0.5 * (O + O.T)


def law_at(s: OUSystem, t: float, x0: float, y0: float) -> GaussianMeasure:
    return GaussianMeasure(mean_at(s, t, x0, y0), covariance_at(s, t))


# ------------------------------------------------------------- Gaussian KL

def conditional_marginal(g: GaussianMeasure) -> CondMarg:
    C = g.cov
    if not C[1, 1] > 0:
        raise DegenerateMeasureError("marginal variance must be positive")
    k = C[0, 1] / C[1, 1]
    return CondMarg(condSlope=k, condVar=C[0, 0] - C[0, 1] ** 2 / C[1, 1],
                    margMean=g.mean[1], margVar=C[1, 1], condIntercept=g.mean[0] - k * g.mean[1])


def kl_1d_gaussian(u1, s1, u2, s2):
    """KL(N(u1, s1) || N(u2, s2)) with s1, s2 variances."""
    if not (s1 > 0 and s2 > 0):
        raise ValueError("variances must be positive")
    return 0.5 * (math.log(s2 / s1) - 1 + s1 / s2 + (u2 - u1) ** 2 / s2)


def kl_gaussian(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """KL(p || q) for Gaussians of any dimension."""
    k = len(p.mean)
    Qi = np.linalg.inv(q.cov)
    dm = q.mean - p.mean
    sp, ldp = np.linalg.slogdet(p.cov)
    sq, ldq = np.linalg.slogdet(q.cov)
    if sp <= 0 or sq <= 0:
        raise DegenerateMeasureError("covariance must be positive definite")
    return 0.5 * (np.trace(Qi @ p.cov) - k + dm @ Qi @ dm + ldq - ldp)


def kl_decomposition(p: GaussianMeasure, q: GaussianMeasure):
    """(D1, D2): x2-average of conditional KLs under p, and marginal KL."""
    cp, cq = conditional_marginal(p), conditional_marginal(q)
    D2 = kl_1d_gaussian(cp.margMean, cp.margVar, cq.margMean, cq.margVar)
    # conditional mean gap (alpha + beta x2) averaged over x2 ~ N(m2, v2)
    al = cp.condIntercept - cq.condIntercept
    be = cp.condSlope - cq.condSlope
    msq = (al + be * cp.margMean) ** 2 + be * be * cp.margVar
    D1 = 0.5 * (math.log(cq.condVar / cp.condVar) - 1 + cp.condVar / cq.condVar + msq / cq.condVar)
    return D1, D2


@dataclass
class KLTrajectory:
    times: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    mu: np.ndarray = field(default=None)
    Omega: np.ndarray = field(default=None)
    singular: np.ndarray = field(default=None)

    @property
    def D(self):
        return self.D1 + self.D2

    @property
    def tv_bound(self):
        return np.sqrt(2 * self.D)


def kl_trajectories(s: OUSystem, x0: float, y0: float, times: Sequence[float]) -> KLTrajectory:
    ref = GaussianMeasure(np.zeros(2), s.Sigma)
    ts = np.asarray(times, dtype=float)
    if np.any(ts <= 0):
        raise ValueError("times must be positive; the point-mass start has infinite KL")
    D1 = np.empty(len(ts))
    D2 = np.empty(len(ts))
    mus = np.empty((len(ts), 2))
    Oms = np.empty((len(ts), 2, 2))
    sing = np.zeros(len(ts), dtype=bool)
    for i, t in enumerate(ts):
        g = law_at(s, t, x0, y0)
        mus[i], Oms[i] = g.mean, g.cov
        cm = conditional_marginal(g) if g.cov[1, 1] > 0 else None
        if cm is None or not cm.condVar > 1e-300:
            D1[i] = D2[i] = np.inf
            sing[i] = True
            continue
        D1[i], D2[i] = kl_decomposition(g, ref)
    return KLTrajectory(ts, D1, D2, mus, Oms, sing)


# --------------------------------------------------------- large-lambda forms

def large_lambda_expansion(s: OUSystem, t: float, x0: float = 1.0, y0: float = 1.0) -> dict:
    """Leading-order covariance and mean as lam -> infinity, exponentials kept with the
    exact eigenvalues:

        Omega11 ~ (1 - e^{-2 g1 t})/(beta1 a) + (Sigma11 - 1/(beta1 a)) (1 - e^{-2 g2 t})
        Omega12 ~ Sigma12 (1 - e^{-2 g2 t}),  Omega22 ~ Sigma22 (1 - e^{-2 g2 t})
        mu1 ~ (x0 + (c/a) y0) e^{-g1 t} - (c/a) y0 e^{-g2 t},  mu2 ~ y0 e^{-g2 t}
    """
    a, c = s.a, s.c
    S = s.Sigma
    E1, E2 = math.exp(-2 * s.gamma1 * t), math.exp(-2 * s.gamma2 * t)
    e1, e2 = math.exp(-s.gamma1 * t), math.exp(-s.gamma2 * t)
    fast = 1 / (s.beta1 * a)
    Om = np.array([
        [fast * (1 - E1) + (S[0, 0] - fast) * (1 - E2), S[0, 1] * (1 - E2)],
        [S[0, 1] * (1 - E2), S[1, 1] * (1 - E2)],
    ])
    mu = np.array([(x0 + (c / a) * y0) * e1 - (c / a) * y0 * e2, y0 * e2])
    return dict(Omega_leading=Om, mu_leading=mu)


def kl_leading_order(s: OUSystem, t: float, x0: float, y0: float):
    """Leading-order (D1, D2) as lam -> infinity."""
    a, c = s.a, s.c
    E1, E2 = math.exp(-2 * s.gamma1 * t), math.exp(-2 * s.gamma2 * t)
    D1 = 0.5 * (-math.log1p(-E1) - E1 + E1 * s.beta1 * a * (x0 + (c / a) * y0) ** 2)
    D2 = 0.5 * (-math.log1p(-E2) - E2 + E2 * s.beta2 * y0 * y0 * s.det / a)
    return D1, D2
