"""Log-Sobolev constants, moment bounds and the two-timescale KL envelopes.

The envelopes bound the conditional divergence D1 and marginal divergence D2 of the dynamics
relative to rho*:

    D1(t) <= D1(0) e^{-2 c1 t} + (1 - e^{-2 c1 t}) c0 / (2 c1 lam)
    D2(t) <= second component of the linear comparison system g' = -C g + B.

c1, c2 come from convexity (Bakry-Emery) degraded by a bounded perturbation (Holley-Stroock);
c0, c0~ are suprema of moment integrals, bounded through polynomial growth constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import gammaln

from .potential import ConvexBoundedSplit, GrowthMetadata, PolyBound


class LsiError(ValueError):
    pass


# ------------------------------------------------------------ LSI constants

def bakry_emery(alpha: float, beta: float) -> float:
    """LSI constant beta*alpha of exp(-beta U) when Hess U >= alpha."""
    if not (alpha > 0 and beta > 0):
        raise LsiError("alpha and beta must be positive")
    return beta * alpha


def holley_stroock(C0: float, beta: float, osc: float) -> float:
    if not C0 > 0 or osc < 0:
        raise LsiError("need C0 > 0 and osc >= 0")
    return C0 * math.exp(-beta * osc)


def schur_complement(H11, H12=None, H22=None, d1: Optional[int] = None):
    """H22 - H12^T H11^-1 H12. Pass three blocks, or a full matrix with its split ``d1``."""
    if H12 is None:
        H = np.asarray(H11, float)
        if d1 is None:
            raise LsiError("full-matrix form needs d1")
        H11, H12, H22 = H[:d1, :d1], H[:d1, d1:], H[d1:, d1:]
    H11, H12, H22 = (np.atleast_2d(np.asarray(m, float)) for m in (H11, H12, H22))
    try:
        X = linalg.solve(H11, H12, assume_a="sym")
    except linalg.LinAlgError as e:
        raise LsiError("singular H11") from e
    if not np.all(np.isfinite(X)) or np.linalg.cond(H11) > 1e14:
        raise LsiError("singular H11")
    S = H22 - H12.T @ X
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class LsiConstants:
    c1: float
    c2: float
    alpha1: float
    alpha2: float
    oscVb: float
    beta1: float
    beta2: float


def lsi_constants(split: ConvexBoundedSplit, beta1: float, beta2: float) -> LsiConstants:
    c1 = split.alpha1 * math.exp(-beta1 * split.oscVb)
    c2 = split.alpha2 * math.exp(-beta2 * split.oscVb)
    return LsiConstants(c1, c2, split.alpha1, split.alpha2, split.oscVb, beta1, beta2)


def gibbs_lsi(alpha: float, beta: float, osc: float = 0.0) -> float:
    """Joint LSI constant of the one-temperature Gibbs measure (not used by the envelopes)."""
    return holley_stroock(bakry_emery(alpha, beta), beta, osc)


# ------------------------------------------------------------ moment bounds

def _pow0(x, r):
    return 1.0 if r == 0 else x ** r


def moment_bound_M(r: float, a: float, a0: float, beta1: float, beta2: float, d1: int, d2: int,
                   initMoment2r: float) -> float:
    """Uniform-in-time bound on E[v^r], v = |x1|^2/lam + |x2|^2 (so also on E|x2|^{2r})."""
    if r < 1:
        raise LsiError("moment_bound_M needs r >= 1")
    if not a > 0:
        raise LsiError("need a > 0")
    k = a0 + d1 / beta1 + d2 / beta2 + 2 * (r - 1) / min(beta1, beta2)
    return initMoment2r + (2 ** r) * _pow0(r - 1, r - 1) / (a ** r * r ** r) * k ** r


def m_r_constant(r: float, a1: float, a2: float, a0: float, beta1: float, d1: int) -> float:
    """-min_{xi >= 0} (a1/2 xi^r - a2 (r-2)/(r-1) xi^{r-1} - (a0 + (d1+r-2)/beta1) xi^{r-2})."""
    kr = a0 + (d1 + r - 2) / beta1
    c = a2 * (r - 2) / (r - 1)

    def f(x):
        return 0.5 * a1 * x ** r - c * x ** (r - 1) - kr * x ** (r - 2)
    # beyond xi_max the leading term dominates
    xmax = 2.0 * (1 + (4 * c / a1) + (4 * kr / a1) ** 0.5)
    grid = np.linspace(0, xmax, 2001)
    i = int(np.argmin(f(grid)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options=dict(xatol=1e-12))
    return max(0.0, -min(float(res.fun), float(f(grid[i]))))


def moment_bound_Mprime(r: float, a1: float, a2: float, a0: float, p: float, beta1: float, d1: int,
                        initMoment: Callable[[float], float], M_table: Callable[[float], float]) -> float:
    """Uniform-in-time bound on E|x1|^r from the fast-block confinement
    x1.grad1 V >= a1|x1|^2 - a2|x2|^p - a0.

    ``initMoment(q)`` returns E|x1|^q at time 0; ``M_table(sigma)`` bounds E|x2|^sigma.
    For r > 2, Young's inequality with exponents (r-1)/(r-2) and r-1 splits the cross term.
    """
    if r < 0:
        raise LsiError("r must be >= 0")
    if r < 2:
        return 1 - r / 2 + (r / 2) * moment_bound_Mprime(2, a1, a2, a0, p, beta1, d1, initMoment, M_table)
    if r == 2:
        return initMoment(2) + (a2 * (M_table(p) if a2 > 0 else 0.0) + a0 + d1 / beta1) / a1
    mr = m_r_constant(r, a1, a2, a0, beta1, d1)
    cross = 2 * a2 * M_table(p * (r - 1)) / ((r - 1) * a1) if a2 > 0 else 0.0
    return initMoment(r) + 2 * mr / a1 + cross


@dataclass(frozen=True)
class CondPolyBound:
    C0: float
    C1: float
    s: float

    def __call__(self, x2norm):
        return self.C0 + self.C1 * np.asarray(x2norm, float) ** self.s


def conditional_poly_bound(r: float, a1: float, gamma1: float, gamma2: float, gamma0: float,
                           a0: float, m1: float, m2: float, beta1: float, d1: int = 1) -> CondPolyBound:
    """<|x1|^r>_*(x2) <= C0 + C1 |x2|^s from the sandwich
    a1|x1|^2 + a2|x2|^2 - a0 <= V <= gamma1|x1|^m1 + gamma2|x2|^m2 + gamma0."""
    if not (a1 > 0 and gamma1 > 0):
        raise LsiError("need a1 > 0 and gamma1 > 0")
    k = beta1 * a1 / 2
    kap = beta1 * gamma1
    logC0 = (gammaln((r + d1) / 2) + math.log(m1) + (d1 / m1) * math.log(kap)
             - math.log(2) - ((r + d1) / 2) * math.log(k) - gammaln(d1 / m1)
             + beta1 * (a0 + gamma0))
    return CondPolyBound(math.exp(logC0), (2 * gamma2 / a1) ** (r / 2), r * m2 / 2)


@dataclass
class MomentBounds:
    """Moment tables derived from growth constants and initial moments."""
    meta: GrowthMetadata
    beta1: float
    beta2: float
    d1: int
    d2: int
    init_x: Callable[[float], float]    # q -> E|x|^q at time 0
    init_x1: Callable[[float], float]   # q -> E|x1|^q at time 0

    def M(self, sigma: float) -> float:
        """Bound on sup_t E|x2|^sigma."""
        if sigma == 0:
            return 1.0
        if sigma < 2:
            return 1 - sigma / 2 + (sigma / 2) * self.M(2)
        g = self.meta
        return moment_bound_M(sigma / 2, g.a, g.a0, self.beta1, self.beta2, self.d1, self.d2,
                              self.init_x(sigma))

    def M2r(self, r: float) -> float:
        g = self.meta
        return moment_bound_M(r, g.a, g.a0, self.beta1, self.beta2, self.d1, self.d2, self.init_x(2 * r))

    def Mprime(self, r: float) -> float:
        if r == 0:
            return 1.0
        g = self.meta
        return moment_bound_Mprime(r, g.b1, g.b2, g.b0, g.p, self.beta1, self.d1, self.init_x1, self.M)

    def cond(self, r: float) -> CondPolyBound:
        g = self.meta
        return conditional_poly_bound(r, g.a1s, g.g1, g.g2, g.g0, g.a0s, g.m1, g.m2, self.beta1, self.d1)


def gaussian_init_moments(mean: Sequence[float], sd: float, d1: int, d2: int):
    """(init_x, init_x1) for a point mass (sd = 0) or an isotropic Gaussian centred at 0."""
    mean = np.asarray(mean, float)
    if sd == 0:
        nx, nx1 = float(np.linalg.norm(mean)), float(np.linalg.norm(mean[:d1]))
        return (lambda q: _pow0(nx, q)), (lambda q: _pow0(nx1, q))
    if np.any(mean != 0):
        raise LsiError("closed-form moments only for centred Gaussians or point masses")

    def chi(d):
        return lambda q: float(math.exp(q / 2 * math.log(2) + gammaln((d + q) / 2) - gammaln(d / 2))) * sd ** q
    return chi(d1 + d2), chi(d1)


# ------------------------------------------------------------- c0 and c0~

def _E_joint(b: PolyBound, mb: MomentBounds) -> float:
    out = b.g0
    if b.g1:
        out += b.g1 * mb.Mprime(b.r1)
    if b.g2:
        out += b.g2 * mb.M(b.r2)
    return out


def _E_cond(b: PolyBound, mb: MomentBounds) -> float:
    out = b.g0
    if b.g1:
        cb = mb.cond(b.r1)
        out += b.g1 * (cb.C0 + (cb.C1 * mb.M(cb.s) if cb.C1 else 0.0))
    if b.g2:
        out += b.g2 * mb.M(b.r2)
    return out


@dataclass
class EmpiricalMoments:
    """sup over record times of simulated E|x1|^q and E|x2|^q (non-rigorous inputs)."""
    x1: Dict[float, float]
    x2: Dict[float, float]

    def get(self, block, q):
        tab = self.x1 if block == "x1" else self.x2
        if q == 0:
            return 1.0
        if q in tab:
            return tab[q]
        raise LsiError(f"empirical moment E|{block}|^{q} not recorded")


def _E_joint_emp(b: PolyBound, em: EmpiricalMoments) -> float:
    return b.g0 + (b.g1 * em.get("x1", b.r1) if b.g1 else 0.0) + (b.g2 * em.get("x2", b.r2) if b.g2 else 0.0)


def _E_cond_emp(b: PolyBound, em: EmpiricalMoments, mb: MomentBounds) -> float:
    out = b.g0
    if b.g1:
        cb = mb.cond(b.r1)
        out += b.g1 * (cb.C0 + (cb.C1 * em.get("x2", cb.s) if cb.C1 else 0.0))
    if b.g2:
        out += b.g2 * em.get("x2", b.r2)
    return out


def _c0_assemble(EjG, EcG, EjH, EcH, beta1, beta2):
    # |grad2 F|^2 <= <|grad2 V|^2>_*, |grad2 V . grad2 F| <= (|grad2 V|^2 + |grad2 F|^2)/2,
    # -lap2 F = -<lap2 V>_* + beta1 Var_*(grad2 V) <= <|lap2 V|>_* + beta1 <|grad2 V|^2>_*
    return (max(beta2 / 4 - beta1, 0.0) * EjG
            + beta1 ** 2 / (4 * beta2) * EcG
            + abs(beta1 / 2 - 1) * 0.5 * (EjG + EcG)
            + (beta1 / beta2) * (EjH + EcH + beta1 * EcG))


def c0_estimate(meta: Optional[GrowthMetadata], beta1: float, beta2: float, mb: Optional[MomentBounds] = None,
                mode: str = "analytic", empirical: Optional[EmpiricalMoments] = None) -> dict:
    """Upper bound on sup_{t, lam} of the c0 integral. Returns {'c0', 'mode', 'rigorous'}."""
    if meta is None:
        if mode == "analytic":
            raise LsiError("analytic c0 needs polynomial growth metadata; use mode='empirical'")
        raise LsiError("empirical c0 still needs polynomial bounds for the integrands")
    G, H = meta.grad2_sq, meta.lap2_abs
    if mode == "analytic":
        if mb is None:
            raise LsiError("analytic mode needs MomentBounds")
        vals = (_E_joint(G, mb), _E_cond(G, mb), _E_joint(H, mb), _E_cond(H, mb))
        rig = True
    elif mode == "empirical":
        if empirical is None or mb is None:
            raise LsiError("empirical mode needs EmpiricalMoments and MomentBounds")
        vals = (_E_joint_emp(G, empirical), _E_cond_emp(G, empirical, mb),
                _E_joint_emp(H, empirical), _E_cond_emp(H, empirical, mb))
        rig = False
    else:
        raise LsiError(f"unknown mode {mode!r}")
    return dict(c0=_c0_assemble(*vals, beta1, beta2), mode=mode, rigorous=rig)


def c0_tilde_estimate(meta: Optional[GrowthMetadata], beta1: float, beta2: float,
                      mb: Optional[MomentBounds] = None, mode: str = "analytic",
                      empirical: Optional[EmpiricalMoments] = None) -> dict:
    """(9/2) beta2^2 sup (E_t |grad2 V|^4 + E_{rho*1 rho_t2} |grad2 V|^4)."""
    if meta is None:
        raise LsiError("c0~ needs polynomial growth metadata")
    G4 = meta.grad2_4th
    if mode == "analytic":
        if mb is None:
            raise LsiError("analytic mode needs MomentBounds")
        s = _E_joint(G4, mb) + _E_cond(G4, mb)
        rig = True
    elif mode == "empirical":
        if empirical is None or mb is None:
            raise LsiError("empirical mode needs EmpiricalMoments and MomentBounds")
        s = _E_joint_emp(G4, empirical) + _E_cond_emp(G4, empirical, mb)
        rig = False
    else:
        raise LsiError(f"unknown mode {mode!r}")
    return dict(c0Tilde=4.5 * beta2 ** 2 * s, mode=mode, rigorous=rig)


# --------------------------------------------------------------- envelopes

def envelope_D1(t, lam: float, D1Init: float, c1: float, c0: float):
    t = np.asarray(t, float)
    e = np.exp(-2 * c1 * t)
    return D1Init * e + (1 - e) * c0 / (2 * c1 * lam)


def default_epsilon(c0: float, c0Tilde: float, c1: float, lam: float, eta: float = 1.0, c2: float = 1.0) -> float:
    """Minimiser sqrt(R2/(R3 lam)) of the plateau, R2 -> c0/(2 eta c1 c2), R3 -> c0~/(eta c2)."""
    if c0Tilde <= 0:
        return math.inf
    R2 = c0 / (2 * eta * c1 * c2)
    R3 = c0Tilde / (eta * c2)
    if R2 <= 0:
        return 1e-300
    return math.sqrt(R2 / (R3 * lam))


@dataclass
class EnvelopeParams:
    c1: float
    c2: float
    c0: float
    c0Tilde: float
    D1Init: float
    D2Init: float
    lam: float
    eta: float = 1.0
    epsilon: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eta < 2:
            raise LsiError("eta must lie in (0, 2)")
        if self.lam < max(1.0, self.c2 / self.c1):
            raise LsiError(f"lambda = {self.lam} below threshold max(1, c2/c1) = {max(1.0, self.c2 / self.c1)}")
        if self.epsilon is None:
            self.epsilon = default_epsilon(self.c0, self.c0Tilde, self.c1, self.lam, self.eta, self.c2)
        if not self.epsilon > 0:
            raise LsiError("epsilon must be positive")


def remainders(t, p: EnvelopeParams, form: str = "comparison"):
    """(R2, R3) at time t. ``form='comparison'`` is the exact second component of the
    comparison system; ``form='loose'`` adds c0/(2 c1 lam) to D1(0) instead of subtracting it,
    which is a looser but still valid bound."""
    t = np.asarray(t, float)
    lam, eta, c1, c2 = p.lam, p.eta, p.c1, p.c2
    es = np.exp(-eta * c2 * t / lam)
    ef = np.exp(-2 * c1 * t)
    sgn = -1.0 if form == "comparison" else 1.0
    if form not in ("comparison", "loose"):
        raise LsiError(f"unknown form {form!r}")
    R2 = (es - ef) * (p.D1Init + sgn * p.c0 / (2 * c1 * lam)) / (2 * c1 - eta * c2 / lam) \
        + (1 - es) * p.c0 / (2 * eta * c1 * c2)
    R3 = (1 - es) * p.c0Tilde / (eta * c2)
    return R2, R3


def envelope_D2(t, lam: float, params: EnvelopeParams, form: str = "comparison"):
    if lam != params.lam:
        params = EnvelopeParams(params.c1, params.c2, params.c0, params.c0Tilde, params.D1Init,
                                params.D2Init, lam, params.eta, None)
    t = np.asarray(t, float)
    R2, R3 = remainders(t, params, form)
    eta, eps = params.eta, params.epsilon
    base = params.D2Init * np.exp(-eta * params.c2 * t / lam)
    if math.isinf(eps):
        return base + R2 * 0.0
    return base + R2 / ((2 - eta) * eps * lam) + R3 * eps / (2 - eta)


# ----------------------------------------------------- comparison system

def gronwall_matrices(p: EnvelopeParams):
    """(C, B) of the linear comparison system d/dt (D1, D2) <= -C (D1, D2) + B."""
    lam, eta, eps = p.lam, p.eta, p.epsilon
    C = np.array([[2 * p.c1, 0.0], [-1.0 / ((2 - eta) * eps * lam), eta * p.c2 / lam]])
    B = np.array([p.c0 / lam, p.c0Tilde * eps / ((2 - eta) * lam)])
    return C, B


def gronwall_system(C, B, f0, t):
    """g(t) for g' = -C g + B, g(0) = f0: e^{-tC} f0 + (I - e^{-tC}) C^-1 B.

    Requires the off-diagonal entries of -C to be nonnegative so the comparison is monotone."""
    C = np.asarray(C, float)
    B = np.asarray(B, float)
    f0 = np.asarray(f0, float)
    if C[0, 1] > 0 or C[1, 0] > 0:
        raise LsiError("monotonicity violated: off-diagonal entries of -C must be >= 0")
    if abs(np.linalg.det(C)) < 1e-300 or np.linalg.cond(C) > 1e15:
        raise LsiError("singular C")
    CinvB = np.linalg.solve(C, B)
    ts = np.atleast_1d(np.asarray(t, float))
    out = np.empty((len(ts), 2))
    for k, tk in enumerate(ts):
        E = linalg.expm(-tk * C)
        out[k] = E @ f0 + CinvB - E @ CinvB
    return out[0] if np.ndim(t) == 0 else out


# --------------------------------------------------- example conditions

def spin_glass_condition(A: float, Delta: float, Delta0: float, B: float, tau: float,
                         N: Optional[int] = None) -> dict:
    """Sufficient convexity condition A > K + Delta0/B with K = (sqrt 2 + tau) sqrt(Delta), and the
    resulting Hessian lower bound alpha. ``p_tau_N`` is the probability of the spectral event."""
    if min(A, Delta, B, tau) <= 0 or Delta0 < 0:
        raise LsiError("inputs must be positive")
    K = (math.sqrt(2) + tau) * math.sqrt(Delta)
    thr = K + Delta0 / B
    m = A - K
    tr = m + B
    det = m * B - Delta0
    alpha = 0.5 * (tr - math.sqrt(max(tr * tr - 4 * det, 0.0)))
    out = dict(holds=A > thr, alpha=alpha, Ktau=K, threshold=thr)
    if N is not None:
        out["p_tau_N"] = 1 - math.exp(-0.5 * tau * tau * N)
    return out


def rank_one_conditions(a: float, b: float, Aq: float, Bq: float, Delta: float, gamma: float,
                        tau0: float, tau1: float, tau2: float,
                        priorSecondMoments=(1.0, 1.0)) -> dict:
    """Convexity conditions for the rank-one inference potential: Aq Bq >= gamma(1-gamma) Delta^2 and
    a b > K^2, with K bounding the data-coupling term in operator norm."""
    if not 0 < gamma < 1:
        raise LsiError("gamma must lie in (0, 1)")
    if Delta < 0:
        raise LsiError("Delta must be >= 0")
    eu, ev = priorSecondMoments
    # |u*||v*| Delta/N <= Delta sqrt(gamma (1 - gamma)) (sqrt(E u^2) + tau1)(sqrt(E v^2) + tau2)
    K = (Delta * math.sqrt(gamma * (1 - gamma)) * (math.sqrt(eu) + tau1) * (math.sqrt(ev) + tau2)
         + math.sqrt(Delta) * (math.sqrt(gamma) + math.sqrt(1 - gamma) + tau0))
    cond1 = Aq * Bq >= gamma * (1 - gamma) * Delta ** 2
    cond2 = a * b > K * K
    tr = a + b
    alpha = 0.5 * (tr - math.sqrt(max(tr * tr - 4 * (a * b - K * K), 0.0)))
    return dict(cond1=cond1, cond2=cond2, Ktau=K, alpha=alpha,
                cond1_lhs=Aq * Bq, cond1_rhs=gamma * (1 - gamma) * Delta ** 2)
