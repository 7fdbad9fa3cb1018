import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracsys.bubbles import BubbleParams, calibrate_kappa, critical_amplitude, ground_state_pair, rescale_translate, talenti_bubble
from fracsys.errors import DomainError, MuOutOfRangeError, ParameterError
from fracsys.functionals import (
    OMEGA,
    OMEGA1,
    OMEGA2,
    RegionTag,
    admissibility_threshold,
    c0_threshold,
    energy_I,
    energy_J,
    energy_level,
    energy_report,
    forcing_admissible,
    grad_J,
    grad_norm,
    h_tau,
    lemma_S_factor,
    lemma_S_factor_minimum,
    nehari_scale,
    psi_region,
    psi_value,
    rayleigh_S,
    rayleigh_Sab,
    splitting_constant,
    splitting_margin,
    tau0_roots,
    tau0_solve,
    weak_residual,
)
from fracsys.grid import FieldPair, ForcingPair, SystemParams, gaussian_bump, pair_inner, pair_norm, riesz_representative

from conftest import random_smooth
from test_bubbles import mexican_hat


def golden_extended(f, a, b, tol=1e-15):
    """Golden-section minimization carried out in ``np.longdouble``."""
    ld = np.longdouble
    a, b = ld(a), ld(b)
    ip = (np.sqrt(ld(5)) - 1) / 2
    c, d = b - ip * (b - a), a + ip * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ip * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ip * (b - a)
            fd = f(d)
    return float((a + b) / 2)


def h_extended(mu, params):
    ld = np.longdouble
    mu, beta, e = ld(mu), ld(params.beta), ld(2) / ld(params.two_star)
    return lambda t: (1 + t * t) / (mu + t**beta) ** e


def random_pair(g, rng, positive=False):
    u, v = random_smooth(g, rng), random_smooth(g, rng)
    if positive:
        return FieldPair.from_arrays(g, np.abs(u.values), np.abs(v.values))
    return FieldPair(u, v)


# -- quotients ------------------------------------------------------------------------
def test_rayleigh_S_invariances(grid, rng):
    u = random_smooth(grid, rng)
    assert rayleigh_S(u * 3.0) == pytest.approx(rayleigh_S(u), rel=1e-12)
    hat = mexican_hat(grid, 1.0)
    assert rayleigh_S(rescale_translate(hat, 0.5)) == pytest.approx(rayleigh_S(hat), rel=1e-6)
    with pytest.raises(DomainError):
        rayleigh_S(grid.zeros())


def test_bubble_beats_random_profiles(grid, rng):
    w = talenti_bubble(BubbleParams((0.0,), 0.5), grid)
    sw = rayleigh_S(w)
    for _ in range(50):
        assert sw <= rayleigh_S(random_smooth(grid, rng, k=int(rng.integers(1, 4))))


def test_rayleigh_Sab_examples(grid, params, rng):
    w = talenti_bubble(BubbleParams((0.0,), 0.5), grid)
    sym = SystemParams.for_grid(grid, 2.5)
    assert rayleigh_Sab(FieldPair(w, w), sym) == pytest.approx(2 * rayleigh_S(w), rel=1e-12)
    p = random_pair(grid, rng, positive=True)
    assert rayleigh_Sab(p * 5.0, params) == pytest.approx(rayleigh_Sab(p, params), rel=1e-12)
    ratio = rayleigh_Sab(FieldPair(w, w * params.tau), params) / rayleigh_S(w)
    assert ratio == pytest.approx(lemma_S_factor(2.0, 3.0), rel=1e-12)
    with pytest.raises(DomainError):
        rayleigh_Sab(FieldPair(w, grid.zeros()), params)


def test_lemma_factor_examples():
    assert lemma_S_factor(2.5, 2.5) == pytest.approx(2.0, abs=1e-15)
    F = lemma_S_factor(2.0, 3.0)
    # independent brute-force minimization of (1+t^2)/t^(2 beta/(alpha+beta))
    t = np.linspace(0.5, 2.5, 2_000_001)
    brute = np.min((1 + t * t) / t ** (6 / 5))
    assert F == pytest.approx(brute, rel=1e-11)
    assert F == pytest.approx(1.9601317042, rel=1e-10)
    assert F < 2
    Fnum, targ = lemma_S_factor_minimum(2.0, 3.0)
    assert Fnum == pytest.approx(F, rel=1e-12) and targ == pytest.approx(np.sqrt(1.5), rel=1e-5)
    assert lemma_S_factor(3.0, 2.0) == pytest.approx(F, rel=1e-12)
    with pytest.raises(ParameterError):
        lemma_S_factor(1.0, 4.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 20.0), st.floats(1.01, 20.0))
def test_lemma_factor_at_most_two(a, b):
    F = lemma_S_factor(a, b)
    assert F <= 2.0 + 1e-14
    assert lemma_S_factor(b, a) == pytest.approx(F, rel=1e-12)


# -- energies -----------------------------------------------------------------------------
def test_energy_I_examples(grid, params, rng):
    assert energy_I(FieldPair.zeros(grid), None, params) == 0.0
    cal = calibrate_kappa(grid)
    gs = ground_state_pair(critical_amplitude(params), BubbleParams((0.0,), cal.scale), params, grid)
    level = energy_level(grid, rayleigh_Sab(gs, params))
    assert energy_I(gs, None, params) == pytest.approx(level, rel=1e-3)
    f = gaussian_bump(grid, 0.0, 2.0)
    g = gaussian_bump(grid, 1.0, 2.0)
    p = random_pair(grid, rng)
    d = energy_I(p, ForcingPair(f * 2.0, g * 2.0), params) - energy_I(p, ForcingPair(f, g), params)
    lin = grid.integrate(f.values * p.u.values) + grid.integrate(g.values * p.v.values)
    assert d == pytest.approx(-lin, rel=1e-12, abs=1e-14)


def test_energy_J_examples(grid, params, rng):
    f, g = gaussian_bump(grid, 0.0, 2.0), gaussian_bump(grid, 1.0, 2.0)
    forcing = ForcingPair(f, g)
    neg = FieldPair.from_arrays(grid, -np.abs(random_smooth(grid, rng).values), random_smooth(grid, rng).values)
    u, v = neg.arrays()
    quad = 0.5 * (grid.hs(u) + grid.hs(v))
    expect = quad - grid.integrate(f.values * u) - grid.integrate(g.values * v)
    assert energy_J(neg, forcing, params) == pytest.approx(expect, rel=1e-14)
    pos = random_pair(grid, rng, positive=True)
    assert energy_J(pos, forcing, params) == pytest.approx(energy_I(pos, forcing, params), rel=1e-14)
    for _ in range(100):
        p = random_pair(grid, rng) * float(rng.uniform(0.5, 5))
        assert energy_J(p, forcing, params) >= energy_I(p, forcing, params) - 1e-14


def test_grad_J_examples(grid, params, rng):
    gs = ground_state_pair(critical_amplitude(params), BubbleParams((0.0,), 0.5), params, grid)
    assert grad_norm(gs, None, params) < 5e-2 * pair_norm(gs)
    f, g = gaussian_bump(grid, 0.0, 2.0), gaussian_bump(grid, 1.0, 2.0)
    forcing = ForcingPair(f, g)
    g0 = grad_J(FieldPair.zeros(grid), forcing, params)
    assert np.allclose(g0.u.values, -riesz_representative(f).values, atol=1e-14)
    assert np.allclose(g0.v.values, -riesz_representative(g).values, atol=1e-14)
    p = random_pair(grid, rng, positive=True) * 2.0
    gr = grad_J(p, forcing, params)
    for _ in range(5):
        h = random_pair(grid, rng)
        eps = 1e-4
        fd = (energy_J(p + h * eps, forcing, params) - energy_J(p - h * eps, forcing, params)) / (2 * eps)
        assert fd == pytest.approx(pair_inner(gr, h), rel=1e-6)


def test_weak_residual_is_the_gradient_pairing(grid, params, rng):
    forcing = ForcingPair(gaussian_bump(grid, 0.0, 2.0), gaussian_bump(grid, 1.0, 2.0))
    p = random_pair(grid, rng, positive=True)
    t = random_pair(grid, rng)
    assert weak_residual(p, forcing, params, t) == pytest.approx(pair_inner(grad_J(p, forcing, params), t), rel=1e-10)
    assert weak_residual(FieldPair.zeros(grid), None, params, t) == 0.0


# -- Psi, regions and the Nehari scale ------------------------------------------------------
def test_region_examples(grid, params, rng):
    tag = psi_region(FieldPair.zeros(grid), params)
    assert tag == RegionTag(OMEGA1, 0.0)
    p = random_pair(grid, rng, positive=True)
    on = p * nehari_scale(p, params)
    assert psi_region(on, params).tag == OMEGA
    nrm2 = pair_norm(on) ** 2
    for lam in (0.5, 2.0):
        expect = (lam**2 - lam**params.two_star) * nrm2
        assert psi_value(on * lam, params) == pytest.approx(expect, rel=1e-8)
    assert psi_region(on * 2.0, params).tag == OMEGA2
    assert psi_region(on * 0.5, params).tag == OMEGA1
    with pytest.raises(ParameterError):
        RegionTag("elsewhere", 0.0)


def test_nehari_scale_examples(grid, params, rng):
    p = random_pair(grid, rng, positive=True)
    on = p * nehari_scale(p, params)
    assert nehari_scale(on, params) == pytest.approx(1.0, rel=1e-12)
    assert nehari_scale(p * 3.0, params) == pytest.approx(nehari_scale(p, params) / 3, rel=1e-12)
    for _ in range(100):
        q = random_pair(grid, rng)
        if psi_value(q, params) == pytest.approx(pair_norm(q) ** 2):
            continue
        lam = nehari_scale(q, params)
        assert abs(psi_value(q * lam, params)) <= 1e-10 * pair_norm(q * lam) ** 2
    with pytest.raises(DomainError):
        nehari_scale(FieldPair(gaussian_bump(grid, 0, 1), grid.zeros()), params)


def test_energy_report_fields(grid, params, rng):
    p = random_pair(grid, rng, positive=True)
    rep = energy_report(p, None, params)
    assert rep.I_value == rep.J_value and rep.region.tag in (OMEGA1, OMEGA2, OMEGA)


# -- h and tau_0 -------------------------------------------------------------------------------
MUS = (1e-6, 1e-4, 1e-2)


@pytest.mark.parametrize("mu", MUS)
def test_tau0_matches_extended_golden_section(params, mu):
    t = tau0_solve(mu, params)
    oracle = golden_extended(h_extended(mu, params), 0.5 * params.tau, 2 * params.tau)
    assert abs(t - oracle) < 1e-8


@pytest.mark.parametrize("mu", MUS)
def test_tau0_root_equation_residual(params, mu):
    t = tau0_solve(mu, params)
    a, b, ts = params.alpha, params.beta, params.two_star
    terms = np.array([ts * mu, a * t**b, b * t ** (b - 2)])
    assert abs(terms[0] + terms[1] - terms[2]) <= 1e-14 * terms.max()


@pytest.mark.parametrize("mu", MUS)
def test_h_identities(params, mu):
    assert h_tau(1.0, mu, params) == pytest.approx(2 * (1 + mu) ** (-2 / 5), rel=1e-12, abs=0)
    assert h_tau(1e-12, mu, params) == pytest.approx(mu ** (-2 / 5), rel=1e-9)


def test_tau0_small_mu_limit_and_roots(params):
    assert abs(tau0_solve(1e-8, params) - np.sqrt(1.5)) < 1e-4
    roots = tau0_roots(1e-2, params)
    assert len(roots) == 2
    small, big = roots
    hs = [h_tau(small * f, 1e-2, params) for f in (0.9, 1.0, 1.1)]
    assert hs[1] > hs[0] and hs[1] > hs[2]  # the root near zero is a local maximum
    assert tau0_solve(1e-2, params) == pytest.approx(big, rel=1e-12)
    taus = [tau0_solve(mu, params) for mu in MUS]
    assert taus == sorted(taus, reverse=True)


def test_tau0_out_of_range(params):
    with pytest.raises(MuOutOfRangeError):
        tau0_solve(10.0, params)
    with pytest.raises(ParameterError):
        tau0_solve(0.0, params)


# -- thresholds --------------------------------------------------------------------------------
def test_c0_and_admissibility(grid):
    assert c0_threshold(grid) == pytest.approx(0.75 * 4 ** (-1 / 3), rel=1e-14)
    sab = 1.5
    assert forcing_admissible(ForcingPair.zeros(grid), sab)
    base = ForcingPair(gaussian_bump(grid, 0.0, 2.0), gaussian_bump(grid, 1.0, 2.0))
    thr = admissibility_threshold(grid, sab)
    from fracsys.grid import dual_norm

    dn = max(dual_norm(base.f), dual_norm(base.g))
    lo, hi = 0.0, 10.0 * thr / dn
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if forcing_admissible(base.scaled(mid), sab) else (lo, mid)
    assert lo * dn == pytest.approx(thr, rel=1e-12)
    assert energy_level(grid, sab) == pytest.approx(0.3 * sab ** (1 / 0.6), rel=1e-14)


# -- splitting inequality --------------------------------------------------------------------------
@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_splitting_inequality_samples(eps):
    rng = np.random.default_rng(7)
    c = splitting_constant(eps, 2.0, 3.0)
    n = 100_000
    q = rng.standard_normal((4, n)) * np.exp(rng.uniform(-3, 3, (4, n)))
    assert np.all(splitting_margin(*q, eps, 2.0, 3.0, c) >= 0)
    # perturbations small relative to (x, y), where the eps term has to carry the bound
    x, y = rng.standard_normal((2, n))
    a, b = rng.standard_normal((2, n)) * 10.0 ** rng.uniform(-8, 0, (2, n))
    assert np.all(splitting_margin(x, y, a, b, eps, 2.0, 3.0, c) >= 0)


@settings(max_examples=300, deadline=None)
@given(st.tuples(*[st.floats(-1e3, 1e3, allow_subnormal=False)] * 4), st.sampled_from([0.5, 0.1, 0.01]))
def test_splitting_inequality_property(q, eps):
    assert splitting_margin(*q, eps, 2.0, 3.0) >= -1e-9 * (1 + max(abs(v) for v in q) ** 5)


def test_splitting_constant_validation():
    with pytest.raises(ParameterError):
        splitting_constant(0.0, 2.0, 3.0)
    assert splitting_constant(0.01, 2.0, 3.0) > splitting_constant(0.1, 2.0, 3.0)
