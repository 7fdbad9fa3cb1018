import numpy as np
import pytest
from scipy.special import erf

from fracsys.bubbles import BubbleParams, rescale_translate, talenti_bubble
from fracsys.decomposition import scale_from_scan
from fracsys.grid import Field, FieldPair, gaussian_bump
from fracsys.morrey import (
    ball_averages,
    ball_symbol,
    bubble_radius_ratio,
    dyadic_ladder,
    morrey_norm,
    morrey_pair_norm,
    morrey_radius,
    morrey_scan,
    morrey_value,
)


def test_dyadic_ladder(grid):
    radii = dyadic_ladder(grid)
    assert radii[0] == 2 * grid.h
    assert all(b == 2 * a for a, b in zip(radii, radii[1:]))
    assert radii[-1] <= grid.L / 2 < 2 * radii[-1]


def test_ball_average_1d_matches_erf(small_grid):
    g = small_grid
    sig = 0.7
    dens = gaussian_bump(g, 0.0, sig).values
    x = g.axis
    for R in (0.3, 1.0, 2.5):
        avg = ball_averages(g, dens, R)
        k = sig * np.sqrt(2)
        exact = sig * np.sqrt(np.pi / 2) * (erf((x + R) / k) - erf((x - R) / k)) / (2 * R)
        inner = np.abs(x) < g.L - R - 6 * sig
        assert np.max(np.abs(avg - exact)[inner]) < 1e-10


def test_ball_average_2d_disk(grid2d):
    g = grid2d
    sig = 0.8
    dens = gaussian_bump(g, [0.0, 0.0], sig).values
    for R in (0.5, 1.5):
        avg = ball_averages(g, dens, R)
        exact = 2 * sig**2 * (1 - np.exp(-R**2 / (2 * sig**2))) / R**2
        assert avg[g.n // 2, g.n // 2] == pytest.approx(exact, rel=1e-9)
    assert ball_symbol(g, 1.0)[0, 0] == 1.0


def test_zero_pair(grid):
    sc = morrey_scan(FieldPair.zeros(grid))
    assert sc.value == 0.0


def test_bubble_center_and_scale(grid):
    for lam, c in ((0.1, 0.37), (0.8, -5.0)):
        w = talenti_bubble(BubbleParams((c,), lam), grid)
        sc = morrey_scan(w)
        assert abs(sc.argmax_center[0] - c) <= grid.h
        assert abs(sc.refined_center[0] - c) <= grid.h
        est = scale_from_scan(sc, grid)
        assert 0.5 * lam <= est <= 2 * lam
        assert sc.refined_radius / lam == pytest.approx(bubble_radius_ratio(1, 0.3), rel=1e-4)


def test_radius_ratio_by_brute_force():
    # maximize rho^(-2s) int_0^rho (1+r^2)^-(N-2s) dr on a fine log grid
    s = 0.3
    rho = np.geomspace(0.5, 20, 20001)
    r = np.linspace(0, 20, 400001)
    f = (1 + r * r) ** (-(1 - 2 * s))
    cum = np.concatenate([[0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(r))])
    vals = rho ** (-2 * s) * np.interp(rho, r, cum)
    assert bubble_radius_ratio(1, s) == pytest.approx(rho[np.argmax(vals)], rel=1e-3)


def test_dyadic_invariance(grid):
    u = gaussian_bump(grid, 0.3, 1.0)
    m0 = morrey_value(u)
    for r in (2.0, 0.5, 4.0, 0.25):
        assert morrey_value(rescale_translate(u, r, [1.5], check=False)) == pytest.approx(m0, rel=1e-6)


def test_tie_break_prefers_first_center(small_grid):
    g = small_grid
    u = gaussian_bump(g, -2.5, 0.5).values + gaussian_bump(g, 2.5, 0.5).values
    sc = morrey_scan(Field(g, u), refine=False)
    assert sc.argmax_center[0] < 0


def test_pair_norm_and_radius(grid):
    w = talenti_bubble(BubbleParams((0.0,), 0.5), grid)
    pair = FieldPair(w, w * 2.0)
    assert morrey_pair_norm(pair) == pytest.approx(np.sqrt(5) * morrey_norm(w), rel=1e-9)
    assert morrey_value(pair) == pytest.approx(5 * morrey_value(w), rel=1e-9)
    R, c = morrey_radius(pair)
    assert R == pytest.approx(0.5 * bubble_radius_ratio(1, 0.3), rel=1e-4)


def test_custom_radii_sorted(grid):
    w = talenti_bubble(BubbleParams((0.0,), 0.5), grid)
    sc = morrey_scan(w, radii=[4.0, 1.0, 2.0], refine=False)
    assert sc.radii == (1.0, 2.0, 4.0) and sc.argmax_radius == 2.0
