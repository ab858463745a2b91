"""Divergence estimates between an ensemble and a reference density.

Two estimators are provided. ``gaussian_fit_kl`` moment-matches a Gaussian and is the right tool
when the true law is Gaussian. ``histogram_kl`` is a binned plug-in estimator (biased upward for
finite samples) for everything else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .ou_exact import DegenerateMeasureError, GaussianMeasure, kl_decomposition, kl_gaussian

BIASED_LABEL = "biased plug-in"
MIN_ROW_COUNT = 10


def _as_2d(samples):
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("expected samples of shape (n, 2)")
    return s


def fit_gaussian(samples) -> GaussianMeasure:
    s = np.asarray(samples, dtype=float)
    C = np.cov(s, rowvar=False)
    if np.linalg.matrix_rank(C) < C.shape[0]:
        raise DegenerateMeasureError("singular sample covariance")
    return GaussianMeasure(s.mean(axis=0), C)


def gaussian_fit_kl(samples, reference: GaussianMeasure) -> dict:
    s = _as_2d(samples)
    if len(s) < 100:
        raise ValueError("need at least 100 samples")
    g = fit_gaussian(s)
    D1, D2 = kl_decomposition(g, reference)
    return dict(D=D1 + D2, D1=D1, D2=D2, D_joint=kl_gaussian(g, reference), fit=g)


def gaussian_fit_kl_batches(samples, reference: GaussianMeasure, n_batches: int = 10) -> dict:
    """KL of the full fit plus the spread of per-batch fits, a rough Monte Carlo error bar."""
    s = _as_2d(samples)
    full = gaussian_fit_kl(s, reference)
    parts = [gaussian_fit_kl(b, reference)["D"] for b in np.array_split(s, n_batches)]
    full["se"] = float(np.std(parts, ddof=1) / math.sqrt(n_batches))
    return full


# ---------------------------------------------------------------- histograms

@dataclass
class HistogramDensity:
    edges1: np.ndarray
    edges2: np.ndarray
    masses: np.ndarray
    count: int

    @classmethod
    def from_samples(cls, samples, edges1, edges2):
        s = _as_2d(samples)
        e1, e2 = np.asarray(edges1, float), np.asarray(edges2, float)
        # mass outside the box is lumped into the edge bins
        i = np.clip(np.searchsorted(e1, s[:, 0], side="right") - 1, 0, len(e1) - 2)
        j = np.clip(np.searchsorted(e2, s[:, 1], side="right") - 1, 0, len(e2) - 2)
        H = np.zeros((len(e1) - 1, len(e2) - 1))
        np.add.at(H, (i, j), 1.0)
        return cls(e1, e2, H / len(s), len(s))

    @property
    def counts(self):
        return np.rint(self.masses * self.count)


def default_edges(reference: GaussianMeasure, n_bins: int = 64, width: float = 5.0):
    sd = np.sqrt(np.diag(reference.cov))
    m = reference.mean
    return (np.linspace(m[0] - width * sd[0], m[0] + width * sd[0], n_bins + 1),
            np.linspace(m[1] - width * sd[1], m[1] + width * sd[1], n_bins + 1))


def _outer_extended(e):
    # the edge bins also carry the reference mass beyond the box
    e = np.array(e, dtype=float)
    span = e[-1] - e[0]
    e[0] -= span
    e[-1] += span
    return e


def reference_masses(reference: Union[GaussianMeasure, Callable], edges1, edges2, nodes: int = 6):
    """Per-bin reference mass by tensor Gauss-Legendre quadrature inside every bin."""
    pdf = reference.pdf if isinstance(reference, GaussianMeasure) else reference
    e1, e2 = _outer_extended(edges1), _outer_extended(edges2)
    xg, wg = np.polynomial.legendre.leggauss(nodes)

    def nodes_of(e):
        lo, hi = e[:-1, None], e[1:, None]
        return 0.5 * (hi - lo) * xg + 0.5 * (hi + lo), 0.5 * (hi - lo) * wg

    x1, w1 = nodes_of(e1)
    x2, w2 = nodes_of(e2)
    X1 = x1[:, None, :, None]
    X2 = x2[None, :, None, :]
    vals = pdf(np.broadcast_to(X1, (len(x1), len(x2), nodes, nodes)),
               np.broadcast_to(X2, (len(x1), len(x2), nodes, nodes)))
    return np.einsum("ijab,ia,jb->ij", vals, w1, w2)


def _discrete_kl_parts(p, q):
    """Chain-rule pieces of discrete KL(p || q) on a 2-D table; 0 log 0 = 0."""
    p1 = p.sum(axis=0)  # x2-marginal (columns index x2)
    q1 = q.sum(axis=0)
    occ = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(occ, p * (np.log(p / p1[None, :]) - np.log(q / q1[None, :])), 0.0)
        marg = np.where(p1 > 0, p1 * (np.log(p1) - np.log(q1)), 0.0)
        joint = np.where(occ, p * (np.log(p) - np.log(q)), 0.0)
    return joint, cond, marg


def histogram_kl(samples, reference, edges=None, n_bins: int = 64) -> dict:
    """Binned plug-in KL between the empirical law and the reference.

    D is the joint discrete KL; D2 uses x2-marginal bins; D1 is the x2-average of row-conditional
    KLs, so D = D1 + D2 holds exactly. D1_trimmed leaves out rows with fewer than 10 samples and
    skipped_mass reports how much empirical mass those rows carry.
    """
    s = _as_2d(samples)
    if edges is None:
        if not isinstance(reference, GaussianMeasure):
            raise ValueError("edges are required for a non-Gaussian reference")
        edges = default_edges(reference, n_bins)
    e1, e2 = edges
    h = HistogramDensity.from_samples(s, e1, e2)
    q = reference_masses(reference, e1, e2)
    q = q / q.sum()
    p = h.masses
    occ = p > 0
    bad = occ & ~(q > 0)
    flagged_mass = float(p[bad].sum())
    if bad.any():
        p = np.where(bad, 0.0, p)
        p = p / p.sum()
    joint, cond, marg = _discrete_kl_parts(p, q)
    col_counts = np.rint(h.masses.sum(axis=0) * h.count)
    thin = col_counts < MIN_ROW_COUNT
    return dict(D=float(joint.sum()), D1=float(cond.sum()), D2=float(marg.sum()),
                D1_trimmed=float(cond[:, ~thin].sum()), skipped_mass=float(p[:, thin].sum()),
                flagged_mass=flagged_mass, label=BIASED_LABEL, hist=h, ref_masses=q)


def tv_histogram(samples, reference, edges=None, n_bins: int = 64, with_se: bool = False):
    s = _as_2d(samples)
    if edges is None:
        edges = default_edges(reference, n_bins)
    h = HistogramDensity.from_samples(s, *edges)
    q = reference_masses(reference, *edges)
    q = q / q.sum()
    tv = 0.5 * float(np.abs(h.masses - q).sum())
    if not with_se:
        return tv
    # delta-method error of 1/2 sum sign(p - q) p under multinomial sampling
    sg = np.sign(h.masses - q)
    var = (np.sum(sg * sg * h.masses) - np.sum(sg * h.masses) ** 2) / h.count
    return tv, 0.5 * math.sqrt(max(var, 0.0))


def tv_discrete(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


# ------------------------------------------------------------------- moments

def moment_table(x1, x2, powers: Sequence[float] = (1, 2), lam: float = 1.0) -> dict:
    """E|x1|^r, E|x2|^r and E[v^r] with v = |x1|^2/lam + |x2|^2, as {(name, r): value}."""
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    if x1.ndim == 1:
        x1 = x1[:, None]
    if x2.ndim == 1:
        x2 = x2[:, None]
    n1 = np.sqrt(np.sum(x1 * x1, -1))
    n2 = np.sqrt(np.sum(x2 * x2, -1))
    v = n1 ** 2 / lam + n2 ** 2
    out = {}
    for r in powers:
        out[("x1", r)] = float(np.mean(n1 ** r))
        out[("x2", r)] = float(np.mean(n2 ** r))
        out[("v", r)] = float(np.mean(v ** r))
    return out


@dataclass
class DivergenceRow:
    t: float
    D1_emp: float
    D2_emp: float
    D_emp: float
    TV_emp: float
    pinsker_rhs: float
    skipped_mass: float = 0.0

    HEADER = ("t", "D1_emp", "D2_emp", "D_emp", "TV_emp", "pinsker_rhs", "skipped_mass")

    def row(self):
        return [self.t, self.D1_emp, self.D2_emp, self.D_emp, self.TV_emp, self.pinsker_rhs,
                self.skipped_mass]


def divergence_row(t, samples, reference, method: str = "gaussian", edges=None) -> DivergenceRow:
    tv = tv_histogram(samples, reference, edges)
    if method == "gaussian":
        k = gaussian_fit_kl(samples, reference)
        skipped = 0.0
    else:
        k = histogram_kl(samples, reference, edges)
        skipped = k["skipped_mass"]
    return DivergenceRow(t, k["D1"], k["D2"], k["D"], tv, math.sqrt(2 * max(k["D"], 0.0)), skipped)
