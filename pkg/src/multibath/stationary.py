"""Stationary measure of the two-temperature dynamics in the large-scale-separation limit.

rho*(x1, x2) = rho1(x1 | x2) rho2(x2) with

    rho1(x1 | x2) = exp(-beta1 V(x1, x2)) / Z1(x2)
    rho2(x2)      = exp(-beta2 F(x2)) / Z2,   F(x2) = -log Z1(x2) / beta1,

so rho* is proportional to Z1(x2)^(beta2/beta1 - 1) exp(-beta1 V). Everything is computed in
log-space on tensor quadrature grids (d1, d2 <= 2).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp

from .ou_exact import GaussianMeasure, gaussian_stationary, kl_decomposition  # noqa: F401
from .potential import Potential, Quadratic

log = logging.getLogger(__name__)

TAIL_EXPONENT = 40.0  # truncation keeps e^{-40} of the tail mass


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    halfwidth1: float = 8.0
    halfwidth2: float = 8.0
    nodes: int = 96
    rule: str = "gauss"  # "gauss" (Gauss-Legendre) or "trapezoid"
    center1: float = 0.0
    center2: float = 0.0

    def __post_init__(self):
        if self.nodes < 16:
            raise QuadratureError("need at least 16 nodes per axis")
        if not (self.halfwidth1 > 0 and self.halfwidth2 > 0):
            raise QuadratureError("half-widths must be positive")
        if self.rule not in ("gauss", "trapezoid"):
            raise QuadratureError(f"unknown rule {self.rule!r}")

    def refined(self, factor=2):
        return QuadratureSpec(self.halfwidth1, self.halfwidth2, self.nodes * factor, self.rule,
                              self.center1, self.center2)


def truncation_halfwidth(a1: float, a0: float, beta: float) -> float:
    """Smallest R with a1 R^2 - a0 >= 40/beta."""
    return math.sqrt((TAIL_EXPONENT / beta + max(a0, 0.0)) / a1)


def auto_spec(p: Potential, beta1: float, beta2: float, nodes: int = 96, rule="gauss",
              margin: float = 1.0) -> QuadratureSpec:
    g = p.growth()
    if g is None:
        return QuadratureSpec(8.0, 8.0, nodes, rule)
    R1 = truncation_halfwidth(g.a1s, g.a0s, beta1) + margin
    R2 = truncation_halfwidth(g.a2s, g.a0s, beta2) + margin
    return QuadratureSpec(R1, R2, nodes, rule)


def _rule_1d(n, hw, center, rule):
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(n)
        return center + hw * x, hw * w
    x = np.linspace(center - hw, center + hw, n)
    w = np.full(n, x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def tensor_grid(n, hw, center, rule, d):
    """Nodes (n^d, d) and log-weights (n^d,)."""
    x, w = _rule_1d(n, hw, center, rule)
    if d == 1:
        return x[:, None], np.log(w)
    if d == 2:
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        return np.column_stack([X.ravel(), Y.ravel()]), np.log(W.ravel())
    raise QuadratureError("quadrature path supports d1, d2 <= 2; use closed forms or sampling")


def _x1_grid(p, quad):
    return tensor_grid(quad.nodes, quad.halfwidth1, quad.center1, quad.rule, p.d1)


def _x2_grid(p, quad):
    return tensor_grid(quad.nodes, quad.halfwidth2, quad.center2, quad.rule, p.d2)


def _as_x2(p, x2):
    x2 = np.asarray(x2, dtype=float)
    if p.d2 == 1 and (x2.ndim == 0 or x2.shape[-1] != 1):
        x2 = x2[..., None]
    return x2


def log_z1(p: Potential, beta1: float, x2, quad: QuadratureSpec):
    """log Z1(x2) for an array of x2 points (shape (..., d2) or (...,) when d2 = 1)."""
    x2 = _as_x2(p, x2)
    shp = x2.shape[:-1]
    X1, lw = _x1_grid(p, quad)
    x2f = x2.reshape(-1, p.d2)
    out = np.empty(len(x2f))
    chunk = max(1, 200_000 // len(X1))
    for i in range(0, len(x2f), chunk):
        V = p.eval(X1[None, :, :], x2f[i:i + chunk, None, :])
        out[i:i + chunk] = logsumexp(-beta1 * V + lw, axis=-1)
    return out.reshape(shp)


def tail_fraction(p: Potential, beta1: float, x2, quad: QuadratureSpec):
    """Boundary-node share of the Z1 integrand; a crude truncation-error indicator."""
    x2 = _as_x2(p, x2).reshape(-1, p.d2)
    X1, lw = _x1_grid(p, quad)
    edge = np.any(np.abs(X1 - quad.center1) >= 0.95 * quad.halfwidth1, axis=-1)
    V = p.eval(X1[None], x2[:, None])
    a = -beta1 * V + lw
    return np.exp(logsumexp(a[:, edge], axis=-1) - logsumexp(a, axis=-1))


def z1(p: Potential, beta1: float, x2, quad: QuadratureSpec):
    return np.exp(log_z1(p, beta1, x2, quad))


def effective_potential(p: Potential, beta1: float, x2, quad: QuadratureSpec):
    return -log_z1(p, beta1, x2, quad) / beta1


@dataclass
class StationaryTables:
    p: Potential
    beta1: float
    beta2: float
    quad: QuadratureSpec
    x2: np.ndarray          # (m, d2) nodes
    log_w2: np.ndarray
    logZ1: np.ndarray
    F: np.ndarray
    logZ2: float
    meta: dict = field(default_factory=dict)

    @property
    def Z1(self):
        return np.exp(self.logZ1)

    @property
    def Z2(self):
        return math.exp(self.logZ2)

    @property
    def rho2(self):
        return np.exp(-self.beta2 * self.F - self.logZ2)

    # evaluators ---------------------------------------------------------
    def log_marginal(self, x2):
        return -self.beta2 * effective_potential(self.p, self.beta1, x2, self.quad) - self.logZ2

    def log_conditional(self, x1, x2):
        x2 = _as_x2(self.p, x2)
        x1 = np.asarray(x1, dtype=float)
        if self.p.d1 == 1 and (x1.ndim == 0 or x1.shape[-1] != 1):
            x1 = x1[..., None]
        return -self.beta1 * self.p.eval(x1, x2) - log_z1(self.p, self.beta1, x2, self.quad)

    def marginal(self, x2):
        return np.exp(self.log_marginal(x2))

    def conditional(self, x1, x2):
        return np.exp(self.log_conditional(x1, x2))

    def joint(self, x1, x2):
        return self.conditional(x1, x2) * self.marginal(x2)

    # expectations -------------------------------------------------------
    def conditional_expectation(self, f: Callable, x2=None):
        """<f>_*(x2) = int f(x1, x2) rho1(x1 | x2) dx1 on the table nodes (or given x2)."""
        x2 = self.x2 if x2 is None else _as_x2(self.p, x2).reshape(-1, self.p.d2)
        X1, lw = _x1_grid(self.p, self.quad)
        V = self.p.eval(X1[None], x2[:, None])
        logw = -self.beta1 * V + lw
        logw = logw - logsumexp(logw, axis=-1, keepdims=True)
        vals = np.asarray(f(np.broadcast_to(X1[None], V.shape + (self.p.d1,)),
                            np.broadcast_to(x2[:, None], V.shape + (self.p.d2,))), dtype=float)
        return np.einsum("ij,ij...->i...", np.exp(logw), vals)

    def expectation(self, f: Callable):
        inner = self.conditional_expectation(f)
        w = np.exp(self.log_w2 - self.beta2 * self.F - self.logZ2)
        return np.einsum("i,i...->...", w, inner)

    def mean(self):
        m1 = self.expectation(lambda a, b: a)
        m2 = self.expectation(lambda a, b: b)
        return np.concatenate([np.atleast_1d(m1), np.atleast_1d(m2)])

    def covariance(self):
        m = self.mean()

        def outer(a, b):
            z = np.concatenate([a, b], axis=-1) - m
            return z[..., :, None] * z[..., None, :]
        C = self.expectation(outer)
        return 0.5 * (C + C.T)

    def normalization(self):
        return float(np.exp(logsumexp(self.log_w2 - self.beta2 * self.F - self.logZ2)))

    def to_rows(self):
        rows = []
        for k in range(len(self.x2)):
            rows.append([*self.x2[k], self.Z1[k], self.F[k], self.rho2[k]])
        return rows


def rho_star(p: Potential, beta1: float, beta2: float, quad: Optional[QuadratureSpec] = None) -> StationaryTables:
    if p.d1 > 2 or p.d2 > 2:
        raise QuadratureError("quadrature path supports d1, d2 <= 2; use closed forms or sampling")
    quad = quad or auto_spec(p, beta1, beta2)
    X2, lw2 = _x2_grid(p, quad)
    lZ1 = log_z1(p, beta1, X2, quad)
    F = -lZ1 / beta1
    lZ2 = float(logsumexp(-beta2 * F + lw2))
    tail = float(np.max(tail_fraction(p, beta1, X2[[0, len(X2) // 2, -1]], quad)))
    meta = dict(quad=quad, tail_z1=tail)
    # tail of the marginal on the x2 edges
    edge = np.any(np.abs(X2 - quad.center2) >= 0.95 * quad.halfwidth2, axis=-1)
    meta["tail_z2"] = float(np.exp(logsumexp(-beta2 * F[edge] + lw2[edge]) - lZ2))
    if max(meta["tail_z1"], meta["tail_z2"]) > 1e-8:
        meta["warning"] = "truncation tail exceeds 1e-8 of the integral"
        log.warning("rho_star: %s (z1 %.2e, z2 %.2e)", meta["warning"], meta["tail_z1"], meta["tail_z2"])
    return StationaryTables(p, beta1, beta2, quad, X2, lw2, lZ1, F, lZ2, meta)


# ---------------------------------------------------------- free energy

@dataclass
class GridDensity:
    """A density on a tensor grid with d1 = d2 = 1: values[i, j] at (x1[i], x2[j])."""
    x1: np.ndarray
    x2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    values: np.ndarray

    @classmethod
    def from_function(cls, f, x1, x2, w1, w2):
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return cls(np.asarray(x1), np.asarray(x2), np.asarray(w1), np.asarray(w2), f(X1, X2))

    def normalized(self):
        Z = np.einsum("i,j,ij->", self.w1, self.w2, self.values)
        return GridDensity(self.x1, self.x2, self.w1, self.w2, self.values / Z)


@dataclass
class FreeEnergyResult:
    value: float            # F(pi)
    reference: float        # F(rho*)
    difference: float       # F(pi) - F(rho*)
    decomposition: float    # D1/beta1 + D2/beta2 computed from KLs
    D1: float
    D2: float
    dropped_cells: int = 0


def _gaussian_free_energy(g: GaussianMeasure, A: np.ndarray, beta1, beta2):
    C, m = g.cov, g.mean
    EV = 0.5 * (np.trace(A @ C) + m @ A @ m)
    condVar = C[0, 0] - C[0, 1] ** 2 / C[1, 1]
    h1 = 0.5 * math.log(2 * math.pi * math.e * condVar)
    h2 = 0.5 * math.log(2 * math.pi * math.e * C[1, 1])
    return EV - h1 / beta1 - h2 / beta2


def _grid_free_energy(d: GridDensity, V: np.ndarray, beta1, beta2):
    pi = d.values
    pi2 = np.einsum("i,ij->j", d.w1, pi)
    mask = pi > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = np.where(mask, np.log(pi) - np.log(pi2)[None, :], 0.0)
        l2 = np.where(pi2 > 0, np.log(pi2), 0.0)
    W = np.outer(d.w1, d.w2)
    return float(np.sum(W * pi * (V + l1 / beta1 + l2[None, :] / beta2))), int(np.sum(~mask))


def free_energy_functional(pi: Union[GaussianMeasure, GridDensity], p: Potential, beta1: float,
                           beta2: float, quad: Optional[QuadratureSpec] = None) -> FreeEnergyResult:
    """Two-temperature free energy int pi (V + log pi1 / beta1 + log pi2 / beta2), where pi1 is the
    conditional of x1 given x2 and pi2 the x2-marginal, together with its value at rho* and the KL
    decomposition D1/beta1 + D2/beta2."""
    if isinstance(pi, GaussianMeasure):
        if not isinstance(p, Quadratic):
            raise TypeError("Gaussian free energy needs a quadratic potential")
        ref = gaussian_stationary(p.params, beta1, beta2)
        F = _gaussian_free_energy(pi, p.A, beta1, beta2)
        F0 = _gaussian_free_energy(ref, p.A, beta1, beta2)
        D1, D2 = kl_decomposition(pi, ref)
        return FreeEnergyResult(F, F0, F - F0, D1 / beta1 + D2 / beta2, D1, D2)

    if p.d1 != 1 or p.d2 != 1:
        raise QuadratureError("grid free energy is implemented for d1 = d2 = 1")
    d = pi.normalized()
    X1, X2 = np.meshgrid(d.x1, d.x2, indexing="ij")
    V = p.eval(X1[..., None], X2[..., None])
    F, dropped = _grid_free_energy(d, V, beta1, beta2)
    if dropped > 0:
        log.info("free energy: %d empty cells excluded from the support", dropped)
    # rho* on the same grid, normalised there so both sides share the discretisation
    tabs = rho_star(p, beta1, beta2, quad)
    r = np.exp(tabs.log_conditional(X1, X2) + tabs.log_marginal(X2))
    rd = GridDensity(d.x1, d.x2, d.w1, d.w2, r).normalized()
    F0, _ = _grid_free_energy(rd, V, beta1, beta2)
    D1, D2 = grid_kl_decomposition(d, rd)
    return FreeEnergyResult(F, F0, F - F0, D1 / beta1 + D2 / beta2, D1, D2, dropped)


def grid_kl_decomposition(p: GridDensity, q: GridDensity):
    """(D1, D2) between two grid densities on the same grid; cells where p vanishes are dropped."""
    p2 = np.einsum("i,ij->j", p.w1, p.values)
    q2 = np.einsum("i,ij->j", q.w1, q.values)
    W = np.outer(p.w1, p.w2)
    mask = (p.values > 0) & (q.values > 0)
    m2 = (p2 > 0) & (q2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lc = np.log(p.values / p2[None, :]) - np.log(q.values / q2[None, :])
        lm = np.log(p2) - np.log(q2)
    D1 = float(np.sum((W * p.values)[mask] * lc[mask]))
    D2 = float(np.sum((p.w2 * p2)[m2] * lm[m2]))
    return D1, D2
