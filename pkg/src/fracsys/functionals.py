"""Scalar functionals and closed-form constants.

Conventions: ``||u||^2 = hs_inner(u, u)`` (Fourier side), ``2* = 2N/(N-2s)``,
and ``||(u, v)||^2 = ||u||^2 + ||v||^2``.  The unforced energy is

    I(u, v) = 1/2 ||(u, v)||^2 - (1/2*) int |u|^alpha |v|^beta - <f, u> - <g, v>,

and ``J`` is the same expression with the positive parts ``u+``, ``v+`` in the
coupling term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, MuOutOfRangeError, ParameterError
from .grid import (
    Field,
    FieldPair,
    ForcingPair,
    GridSpec,
    SystemParams,
    dual_norm,
    hs_inner,
    integral_power,
)

__all__ = [
    "RegionTag",
    "EnergyReport",
    "rayleigh_S",
    "rayleigh_Sab",
    "lemma_S_factor",
    "lemma_S_factor_minimum",
    "energy_I",
    "energy_J",
    "grad_J",
    "grad_norm",
    "energy_report",
    "psi_value",
    "psi_region",
    "nehari_scale",
    "weak_residual",
    "h_tau",
    "tau0_solve",
    "tau0_roots",
    "c0_threshold",
    "admissibility_threshold",
    "forcing_admissible",
    "energy_level",
    "splitting_constant",
    "splitting_margin",
]

OMEGA1, OMEGA, OMEGA2 = "Omega1", "Omega", "Omega2"


@dataclass(frozen=True)
class RegionTag:
    """Which part of the partition by the sign of ``Psi`` a pair belongs to."""

    tag: str
    psi_value: float

    def __post_init__(self):
        if self.tag not in (OMEGA1, OMEGA, OMEGA2):
            raise ParameterError(f"unknown region tag {self.tag!r}")


@dataclass(frozen=True)
class EnergyReport:
    I_value: float
    J_value: float
    grad_norm: float
    region: RegionTag


# ---------------------------------------------------------------------------
# array kernels shared with the solvers
# ---------------------------------------------------------------------------
def _coupling(grid: GridSpec, u, v, params: SystemParams, positive: bool) -> float:
    if positive:
        u = np.maximum(u, 0.0)
        v = np.maximum(v, 0.0)
    else:
        u = np.abs(u)
        v = np.abs(v)
    return grid.integrate(u**params.alpha * v**params.beta)


def _energy(grid, u, v, f, g, params, positive: bool) -> float:
    quad = 0.5 * (grid.hs(u) + grid.hs(v))
    lin = grid.integrate(f * u) + grid.integrate(g * v) if f is not None else 0.0
    return quad - _coupling(grid, u, v, params, positive) / params.two_star - lin


def _grad(grid, u, v, f, g, params):
    a, b, ts = params.alpha, params.beta, params.two_star
    up = np.maximum(u, 0.0)
    vp = np.maximum(v, 0.0)
    ru = (a / ts) * up ** (a - 1) * vp**b
    rv = (b / ts) * up**a * vp ** (b - 1)
    if f is not None:
        ru = ru + f
        rv = rv + g
    return u - grid.riesz(ru), v - grid.riesz(rv)


def _forcing_arrays(forcing: ForcingPair | None):
    if forcing is None:
        return None, None
    return forcing.f.values, forcing.g.values


# ---------------------------------------------------------------------------
# quotients
# ---------------------------------------------------------------------------
def rayleigh_S(u: Field) -> float:
    """Sobolev quotient ``||u||^2 / (int |u|^(2*))^(2/2*)``."""
    ts = u.grid.two_star
    den = integral_power(u, ts)
    if den <= 0:
        raise DomainError("the Sobolev quotient is undefined for the zero field")
    return hs_inner(u, u) / den ** (2.0 / ts)


def rayleigh_Sab(pair: FieldPair, params: SystemParams) -> float:
    """Coupled quotient ``||(u,v)||^2 / (int |u|^alpha |v|^beta)^(2/2*)``."""
    g = pair.grid
    u, v = pair.arrays()
    den = _coupling(g, u, v, params, positive=False)
    if den <= 0:
        raise DomainError("the coupled quotient is undefined when the coupling vanishes")
    return (g.hs(u) + g.hs(v)) / den ** (2.0 / params.two_star)


def lemma_S_factor(alpha: float, beta: float) -> float:
    """Factor ``F = (a/b)^(b/(a+b)) + (a/b)^(-a/(a+b))`` with ``a = alpha``, ``b = beta``.

    ``F`` equals ``min_t (1 + t^2) / t^(2 beta/(alpha+beta))``, the ratio of the
    coupled quotient of ``(w, t w)`` to the scalar quotient of ``w``.  By the
    weighted AM-GM inequality ``F <= 2``, with equality exactly when
    ``alpha = beta``.
    """
    if not (alpha > 1 and beta > 1):
        raise ParameterError("alpha and beta must exceed 1")
    r = alpha / beta
    p = alpha + beta
    return float(r ** (beta / p) + r ** (-alpha / p))


def lemma_S_factor_minimum(alpha: float, beta: float) -> tuple[float, float]:
    """Numerically minimize ``(1 + t^2) / t^(2 beta/(alpha+beta))`` over ``t > 0``.

    Returns ``(minimum, argmin)``; the argmin is ``sqrt(beta/alpha)``.
    """
    e = 2.0 * beta / (alpha + beta)

    def obj(logt):
        t = np.exp(logt)
        return (1.0 + t * t) / t**e

    res = minimize_scalar(obj, bracket=(-1.0, 0.0, 1.0), tol=1e-12)
    return float(res.fun), float(np.exp(res.x))


# ---------------------------------------------------------------------------
# energies and gradients
# ---------------------------------------------------------------------------
def energy_I(pair: FieldPair, forcing: ForcingPair | None, params: SystemParams) -> float:
    f, g = _forcing_arrays(forcing)
    return _energy(pair.grid, *pair.arrays(), f, g, params, positive=False)


def energy_J(pair: FieldPair, forcing: ForcingPair | None, params: SystemParams) -> float:
    f, g = _forcing_arrays(forcing)
    return _energy(pair.grid, *pair.arrays(), f, g, params, positive=True)


def grad_J(pair: FieldPair, forcing: ForcingPair | None, params: SystemParams) -> FieldPair:
    """Riesz representative of the derivative of ``J`` (the Sobolev gradient)."""
    f, g = _forcing_arrays(forcing)
    gu, gv = _grad(pair.grid, *pair.arrays(), f, g, params)
    return FieldPair.from_arrays(pair.grid, gu, gv)


def grad_norm(pair: FieldPair, forcing: ForcingPair | None, params: SystemParams) -> float:
    gu, gv = grad_J(pair, forcing, params).arrays()
    g = pair.grid
    return float(np.sqrt(max(g.hs(gu) + g.hs(gv), 0.0)))


def weak_residual(
    pair: FieldPair, forcing: ForcingPair | None, params: SystemParams, test: FieldPair
) -> float:
    """Weak-form residual of the system tested against ``test = (phi, psi)``."""
    g = pair.grid
    u, v = pair.arrays()
    phi, psi = test.arrays()
    a, b, ts = params.alpha, params.beta, params.two_star
    up, vp = np.maximum(u, 0.0), np.maximum(v, 0.0)
    lhs = g.hs(u, phi) + g.hs(v, psi)
    rhs = g.integrate((a / ts) * up ** (a - 1) * vp**b * phi)
    rhs += g.integrate((b / ts) * up**a * vp ** (b - 1) * psi)
    if forcing is not None:
        rhs += g.integrate(forcing.f.values * phi) + g.integrate(forcing.g.values * psi)
    return float(lhs - rhs)


# ---------------------------------------------------------------------------
# Psi and the Nehari scale
# ---------------------------------------------------------------------------
def psi_value(pair: FieldPair, params: SystemParams) -> float:
    """``Psi(u,v) = ||(u,v)||^2 - (2*-1) int |u|^alpha |v|^beta``."""
    g = pair.grid
    u, v = pair.arrays()
    return g.hs(u) + g.hs(v) - (params.two_star - 1) * _coupling(g, u, v, params, False)


def psi_region(pair: FieldPair, params: SystemParams, tol_psi: float | None = None) -> RegionTag:
    """Classify a pair by the sign of ``Psi``.

    The default tolerance is ``1e-8 ||(u,v)||^2``.  The origin is tagged
    ``Omega1``.
    """
    g = pair.grid
    u, v = pair.arrays()
    nrm2 = g.hs(u) + g.hs(v)
    psi = nrm2 - (params.two_star - 1) * _coupling(g, u, v, params, False)
    if not (np.any(u) or np.any(v)):
        return RegionTag(OMEGA1, 0.0)
    tol = 1e-8 * nrm2 if tol_psi is None else tol_psi
    if abs(psi) <= tol:
        return RegionTag(OMEGA, psi)
    return RegionTag(OMEGA1 if psi > 0 else OMEGA2, psi)


def nehari_scale(pair: FieldPair, params: SystemParams) -> float:
    """The unique ``lam > 0`` with ``Psi(lam u, lam v) = 0``."""
    g = pair.grid
    u, v = pair.arrays()
    cpl = _coupling(g, u, v, params, False)
    if cpl <= 0:
        raise DomainError("nehari_scale needs a positive coupling integral")
    nrm2 = g.hs(u) + g.hs(v)
    return float((nrm2 / ((params.two_star - 1) * cpl)) ** (1.0 / (params.two_star - 2)))


def energy_report(
    pair: FieldPair, forcing: ForcingPair | None, params: SystemParams, tol_psi=None
) -> EnergyReport:
    return EnergyReport(
        I_value=energy_I(pair, forcing, params),
        J_value=energy_J(pair, forcing, params),
        grad_norm=grad_norm(pair, forcing, params),
        region=psi_region(pair, params, tol_psi),
    )


# ---------------------------------------------------------------------------
# h(tau) and tau_0
# ---------------------------------------------------------------------------
def h_tau(tau, mu: float, params: SystemParams):
    """``h(tau) = (1 + tau^2) / (mu + tau^beta)^(2/2*)``."""
    tau = np.asarray(tau, dtype=float)
    out = (1.0 + tau**2) / (mu + tau**params.beta) ** (2.0 / params.two_star)
    return float(out) if out.ndim == 0 else out


def _root_fn(tau, mu, params):
    a, b, ts = params.alpha, params.beta, params.two_star
    return ts * mu + a * tau**b - b * tau ** (b - 2)


def tau0_roots(mu: float, params: SystemParams, lo: float = 1e-8, hi: float | None = None,
               samples: int = 2000) -> list[float]:
    """All positive roots of ``2* mu + alpha tau^beta - beta tau^(beta-2)`` in ``[lo, hi]``.

    Roots are bracketed by sign changes on a logarithmic sample grid and then
    refined with Brent's method.
    """
    hi = 10.0 * params.tau if hi is None else hi
    t = np.geomspace(lo, hi, samples)
    phi = _root_fn(t, mu, params)
    roots = []
    for k in np.nonzero(np.sign(phi[:-1]) * np.sign(phi[1:]) < 0)[0]:
        roots.append(brentq(_root_fn, t[k], t[k + 1], args=(mu, params), xtol=1e-300, rtol=1e-15))
    roots.extend(float(t[k]) for k in np.nonzero(phi == 0)[0])
    return sorted(roots)


def tau0_solve(mu: float, params: SystemParams, lo: float = 1e-8, hi: float | None = None) -> float:
    """Global minimizer ``tau_0`` of ``h`` among the roots of its critical-point equation.

    ``h'(tau)`` has the sign of ``2* mu + alpha tau^beta - beta tau^(beta-2)``.
    For ``beta > 2`` that function has two positive roots when ``mu`` is small,
    a local maximum of ``h`` near the origin and the minimizer near
    ``sqrt(beta/alpha)``; every root is found and the one with the least ``h``
    is returned after a Newton polish.  Global minimality is confirmed
    against ``h`` sampled on a 200-point logarithmic grid.

    Raises
    ------
    MuOutOfRangeError
        If ``h(0+) <= h(1)`` (``mu`` too large) or no root minimizes ``h``.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    ts = params.two_star
    if not mu ** (-2.0 / ts) > 2.0 * (1.0 + mu) ** (-2.0 / ts):
        raise MuOutOfRangeError(f"mu = {mu} fails the smallness test h(0+) > h(1)")
    hi = 10.0 * params.tau if hi is None else hi
    roots = tau0_roots(mu, params, lo, hi)
    if not roots:
        raise MuOutOfRangeError(f"no positive critical point of h for mu = {mu}")
    vals = [h_tau(r, mu, params) for r in roots]
    tau = roots[int(np.argmin(vals))]
    a, b = params.alpha, params.beta
    for _ in range(3):
        d = a * b * tau ** (b - 1) - b * (b - 2) * tau ** (b - 3)
        if d == 0:
            break
        step = _root_fn(tau, mu, params) / d
        cand = tau - step
        if not (cand > 0 and abs(_root_fn(cand, mu, params)) < abs(_root_fn(tau, mu, params))):
            break
        tau = cand
    sample = h_tau(np.geomspace(lo, hi, 200), mu, params)
    if h_tau(tau, mu, params) > sample.min() * (1.0 + 1e-12):
        raise MuOutOfRangeError(f"no critical point of h is its global minimum for mu = {mu}")
    return float(tau)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------
def c0_threshold(grid: GridSpec, params: SystemParams | None = None) -> float:
    """``C0 = (4s/(N+2s)) (2*-1)^(-(N-2s)/(4s))``."""
    N, s = grid.dim, grid.s
    ts = grid.two_star
    return float(4 * s / (N + 2 * s) * (ts - 1) ** (-(N - 2 * s) / (4 * s)))


def admissibility_threshold(grid: GridSpec, sab_estimate: float) -> float:
    """Upper bound ``C0 S_ab^(N/4s)`` on the dual norms of admissible forcings."""
    return c0_threshold(grid) * sab_estimate ** (grid.dim / (4 * grid.s))


def forcing_admissible(forcing: ForcingPair, sab_estimate: float) -> bool:
    """True when ``max(||f||_*, ||g||_*) < C0 S_ab^(N/4s)``."""
    thr = admissibility_threshold(forcing.grid, sab_estimate)
    return max(dual_norm(forcing.f), dual_norm(forcing.g)) < thr


def energy_level(grid: GridSpec, sab: float) -> float:
    """``(s/N) S_ab^(N/2s)``: the energy of a ground-state pair and the bubble quantum."""
    return grid.s / grid.dim * sab ** (grid.dim / (2 * grid.s))


# ---------------------------------------------------------------------------
# splitting inequality
# ---------------------------------------------------------------------------
def _single_power_constant(delta: float, p: float) -> float:
    """``C`` with ``||x+a|^p - |x|^p| <= delta |x|^p + C |a|^p`` for all reals.

    If ``|a| <= eta |x|`` the mean value theorem gives the bound
    ``p eta (1+eta)^(p-1) |x|^p``, which equals ``delta |x|^p`` for the chosen
    ``eta``; otherwise ``|x| < |a|/eta`` and both powers are below
    ``(1 + 1/eta)^p |a|^p``.
    """
    eta = brentq(lambda e: p * e * (1 + e) ** (p - 1) - delta, 0.0, delta / p)
    return float((1.0 + 1.0 / eta) ** p)


def splitting_constant(eps: float, alpha: float, beta: float) -> float:
    """Explicit ``C_eps`` for ``||x+a|^al |y+b|^be - |x|^al |y|^be| <= eps(|x|^p + |y|^p) + C_eps(|a|^p + |b|^p)``.

    Here ``p = alpha + beta``.  The difference is split as
    ``|y+b|^be (|x+a|^al - |x|^al) + |x|^al (|y+b|^be - |y|^be)``; each bracket
    is bounded with :func:`_single_power_constant` (tolerances ``eps/2^(be+1)``
    and ``eps/4``), ``|y+b|^be <= 2^(be-1)(|y|^be + |b|^be)``, and every mixed
    product is absorbed with the weighted Young inequality
    ``X^al Y^be <= (al/p) X^p + (be/p) Y^p`` after a rescaling that puts half
    of ``eps`` on the ``x`` and ``y`` terms.
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    a, b = float(alpha), float(beta)
    p = a + b
    c1 = _single_power_constant(eps / 2 ** (b + 1), a)
    c2 = _single_power_constant(eps / 4, b)
    k1 = eps / 4 + c2
    k2 = 2 ** (b - 1) * c1
    t1p = eps * p / (2 * k1 * a)
    t2p = eps * p / (2 * k2 * b)
    c_a = k2 * (a / p) * t2p ** (-b / a) + k2 * a / p
    c_b = k1 * (b / p) * t1p ** (-a / b) + k2 * b / p
    return float(max(c_a, c_b))


def splitting_margin(x, y, a, b, eps: float, alpha: float, beta: float, c_eps: float | None = None):
    """Right side minus left side of the splitting inequality (nonnegative when it holds)."""
    c = splitting_constant(eps, alpha, beta) if c_eps is None else c_eps
    p = alpha + beta
    lhs = np.abs(np.abs(x + a) ** alpha * np.abs(y + b) ** beta - np.abs(x) ** alpha * np.abs(y) ** beta)
    rhs = eps * (np.abs(x) ** p + np.abs(y) ** p) + c * (np.abs(a) ** p + np.abs(b) ** p)
    return rhs - lhs
