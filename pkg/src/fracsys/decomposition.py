"""Operational profile decomposition of a pair into a limit, bubbles and a remainder.

The loop is greedy: subtract an estimate of the limit, locate the most
concentrated piece with a Morrey scan, fit a bubble template there, subtract
it, and repeat.  Every accepted bubble is then refitted jointly with the
others, because bubble tails decay only like ``|x|^-(N-2s)`` and overlap
everywhere on a finite box.

Besides the decomposition itself the module provides the diagnostics used to
check it: the energy ledger, pairwise separation scores, the Brezis-Lieb
defect of the coupling term and two scale-invariant norm ratios.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .bubbles import BubbleParams, GroundStatePair, bubble_profile, calibrate_kappa
from .errors import DecompositionIncompleteWarning, DomainError, NoBubbleError, ParameterError
from .functionals import energy_I
from .grid import Field, FieldPair, ForcingPair, GridSpec, SystemParams, save_field
from .morrey import (
    MorreyScan,
    ball_symbol,
    bubble_radius_ratio,
    dyadic_ladder,
    morrey_pair_norm,
    morrey_scan,
    morrey_value,
)

__all__ = [
    "MorreyScan",
    "BubbleFit",
    "Decomposition",
    "DecomposeOpts",
    "morrey_scan",
    "morrey_value",
    "dyadic_ladder",
    "scale_from_scan",
    "fit_correlation",
    "align_bubble",
    "extract_bubble",
    "profile_decompose",
    "separation_matrix",
    "brezis_lieb_defect",
    "interpolation_ratio",
    "embedding_ratio",
    "decomposition_report",
    "write_decomposition",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BubbleFit:
    """One extracted bubble: location, scale, amplitudes and its energy ``I_{0,0}``."""

    center: tuple
    scale: float
    amplitudes: tuple
    fit_correlation: float
    energy: float

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "scale": self.scale,
            "amplitudes": list(self.amplitudes),
            "fit_correlation": self.fit_correlation,
            "energy": self.energy,
        }


@dataclass
class Decomposition:
    """Result of :func:`profile_decompose`.

    ``energy_ledger`` is ``(gamma_input, I_limit, sum_I_bubbles, defect)``
    with ``defect = gamma_input - I_limit - sum_I_bubbles``; it is always
    reported, and ``warnings`` records when it exceeds the tolerance.
    """

    limit_pair: FieldPair
    bubbles: list
    residual: FieldPair
    residual_norm: float
    energy_ledger: tuple
    separation: np.ndarray
    tolerance: float = 0.0
    warnings: list = dc_field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.bubbles)

    @property
    def relative_defect(self) -> float:
        gamma, _, _, defect = self.energy_ledger
        return abs(defect) / max(abs(gamma), np.finfo(float).tiny)


@dataclass(frozen=True)
class DecomposeOpts:
    """Controls for :func:`profile_decompose`.

    Attributes
    ----------
    max_bubbles : int
        Upper bound on the number of extracted bubbles.
    residual_tol : float, optional
        Absolute ``H^s`` pair norm below which the loop stops; by default
        ``rel_tol`` times the norm of the input after removing the limit.
    fit_threshold : float
        Smallest windowed correlation accepted as a bubble.
    defect_tol : float
        Relative ledger defect above which a warning is attached.
    defect_atol : float
        Absolute defect below which no warning is attached.
    window : float
        Acceptance-window radius in units of the bubble scale; location and
        amplitudes use half of it.
    polish : bool
        Refine centers and scales by minimizing the fitted residual.
    refit_sweeps : int
        Rounds of joint refitting after each accepted bubble.
    """

    max_bubbles: int = 4
    residual_tol: float | None = None
    rel_tol: float = 1e-2
    fit_threshold: float = 0.95
    defect_tol: float = 1e-2
    defect_atol: float = 1e-12
    window: float = 8.0
    polish: bool = True
    refit_sweeps: int = 2

    def __post_init__(self):
        if self.max_bubbles < 0:
            raise ParameterError("max_bubbles must be nonnegative")
        if not 0 < self.fit_threshold <= 1:
            raise ParameterError("fit_threshold must lie in (0, 1]")
        if not self.window > 0:
            raise ParameterError("window must be positive")


# ---------------------------------------------------------------------------
# template fitting
# ---------------------------------------------------------------------------
def _template(grid: GridSpec, center, scale: float, kappa: float) -> np.ndarray:
    return kappa * bubble_profile(grid, center, scale)


def scale_from_scan(scan: MorreyScan, grid: GridSpec) -> float:
    """Bubble scale implied by the refined Morrey radius.

    For a bubble of scale ``lam`` the maximizing radius is
    ``bubble_radius_ratio(N, s) * lam``, so the scale estimate divides by it.
    """
    return scan.refined_radius / bubble_radius_ratio(grid.dim, grid.s)


def _amplitudes(grid: GridSpec, comps, templates) -> np.ndarray:
    """Least-squares amplitudes in ``H^s``, one column per component."""
    hats = [grid.fft(t) for t in templates]
    G = np.array([[grid.spectral_dot(a, b, grid.multiplier) for b in hats] for a in hats])
    out = []
    for c in comps:
        chat = grid.fft(c)
        rhs = np.array([grid.spectral_dot(chat, h, grid.multiplier) for h in hats])
        out.append(np.linalg.solve(G, rhs))
    return np.array(out).T  # (n_templates, n_components)


def fit_correlation(pair: FieldPair, center, scale: float, direction=(1.0, 1.0),
                    window: float = 8.0) -> float:
    """Correlation of ``pair`` with ``(d_u w, d_v w)`` on the ball ``|x - c| <= window * scale``.

    ``w`` is the unit-amplitude profile of the given center and scale and
    ``direction`` the expected amplitude ratio.  The correlation is not
    mean-centered, so sign changes and missing tails inside the window both
    lower it.  Negative values are clipped to 0 and the result lies in
    ``[0, 1]``.
    """
    g = pair.grid
    mask = g.radius2(center) <= (window * scale) ** 2
    if not np.any(mask):
        return 0.0
    w = bubble_profile(g, center, scale)[mask]
    u, v = (x[mask] for x in pair.arrays())
    tu, tv = direction[0] * w, direction[1] * w
    num = float(np.dot(u, tu) + np.dot(v, tv))
    den = float(np.sqrt((np.dot(u, u) + np.dot(v, v)) * (np.dot(tu, tu) + np.dot(tv, tv))))
    if den == 0:
        return 0.0
    return float(min(max(num / den, 0.0), 1.0))


def _local_fit(pair: FieldPair, center, scale: float, direction, window: float):
    """Pearson correlation and regression slopes of ``pair`` on ``w`` inside a window.

    Mean-centering absorbs the nearly constant contribution of distant
    profiles, whose tails decay too slowly to ignore on a finite box.
    """
    g = pair.grid
    mask = g.radius2(center) <= (window * scale) ** 2
    if np.count_nonzero(mask) < 3:
        return -1.0, (0.0, 0.0)
    w = bubble_profile(g, center, scale)[mask]
    wc = w - w.mean()
    ww = float(wc @ wc)
    if ww == 0:
        return -1.0, (0.0, 0.0)
    comps = [x[mask] - x[mask].mean() for x in pair.arrays()]
    d = np.asarray(direction, dtype=float)
    num = float(sum(dk * (c @ wc) for dk, c in zip(d, comps)))
    den = float(np.sqrt(sum(c @ c for c in comps) * (d @ d) * ww))
    slopes = tuple(float(c @ wc) / ww for c in comps)
    return (num / den if den > 0 else -1.0), slopes


def _clamp_scale(grid: GridSpec, lam: float) -> float:
    return float(min(max(lam, grid.h / 8), grid.L / 4))


def _wrap(grid: GridSpec, c) -> np.ndarray:
    return (np.asarray(c, dtype=float) + grid.L) % (2 * grid.L) - grid.L


def _locate(pair: FieldPair, center, scale, direction, window: float = 4.0):
    """Refine ``(center, scale)`` by maximizing the windowed Pearson correlation."""
    g = pair.grid
    c0 = np.asarray(center, dtype=float)

    def unpack(z):
        return _wrap(g, c0 + z[1:] * scale), _clamp_scale(g, scale * np.exp(z[0]))

    def neg(z):
        c, lam = unpack(z)
        return -_local_fit(pair, c, lam, direction, window)[0]

    z0 = np.zeros(g.dim + 1)
    simplex = np.vstack([z0] + [0.1 * np.eye(g.dim + 1)[k] for k in range(g.dim + 1)])
    res = minimize(neg, z0, method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-15, "maxiter": 800, "initial_simplex": simplex})
    z = res.x if res.fun <= neg(z0) else z0
    c, lam = unpack(z)
    return tuple(map(float, c)), lam


def _captured(grid, hats, other_hats, G_other, R_other, th):
    """Energy of ``hats`` captured by span(others, template) in ``H^s``."""
    m = grid.multiplier
    k = len(other_hats)
    G = np.empty((k + 1, k + 1))
    G[:k, :k] = G_other
    for i, oh in enumerate(other_hats):
        G[i, k] = G[k, i] = grid.spectral_dot(oh, th, m)
    G[k, k] = grid.spectral_dot(th, th, m)
    total = 0.0
    for j, h in enumerate(hats):
        r = np.append(R_other[:, j], grid.spectral_dot(h, th, m)) if k else \
            np.array([grid.spectral_dot(h, th, m)])
        total += float(r @ np.linalg.solve(G, r))
    return total


def _polish(grid: GridSpec, comps, center, scale, kappa, others=()):
    """Refine ``(center, scale)`` by maximizing the ``H^s`` energy captured jointly with ``others``."""
    m = grid.multiplier
    hats = [grid.fft(c) for c in comps]
    other_hats = [grid.fft(t) for t in others]
    G_other = np.array([[grid.spectral_dot(a, b, m) for b in other_hats] for a in other_hats])
    R_other = np.array([[grid.spectral_dot(h, oh, m) for h in hats] for oh in other_hats])
    c0 = np.asarray(center, dtype=float)

    def unpack(z):
        return _wrap(grid, c0 + z[1:] * scale), _clamp_scale(grid, scale * np.exp(z[0]))

    def neg_captured(z):
        c, lam = unpack(z)
        th = grid.fft(_template(grid, c, lam, kappa))
        return -_captured(grid, hats, other_hats, G_other, R_other, th)

    z0 = np.zeros(grid.dim + 1)
    simplex = np.vstack([z0] + [0.05 * np.eye(grid.dim + 1)[k] for k in range(grid.dim + 1)])
    res = minimize(neg_captured, z0, method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-15, "maxiter": 800,
                            "initial_simplex": simplex})
    z = res.x if res.fun <= neg_captured(z0) else z0
    c, lam = unpack(z)
    return tuple(map(float, c)), lam


def _candidates(pair: FieldPair, rel_floor: float = 0.05, limit: int = 32):
    """Spatial local maxima of the ladder functional at every ladder radius, best first."""
    g = pair.grid
    dens = sum(x * x for x in pair.arrays())
    dhat = g.fft(dens)
    gexp = g.dim - 2 * g.s
    out = []
    for R in dyadic_ladder(g):
        A = g.ifft(dhat * ball_symbol(g, R)) * R**gexp
        peak = np.ones(g.shape, dtype=bool)
        for ax in range(g.dim):
            peak &= (A >= np.roll(A, 1, axis=ax)) & (A > np.roll(A, -1, axis=ax))
        for idx in zip(*np.nonzero(peak)):
            out.append((float(A[idx]), tuple(float(g.axis[i]) for i in idx), R))
    if not out:
        return []
    top = max(v for v, _, _ in out)
    out = [c for c in out if c[0] >= rel_floor * top]
    out.sort(key=lambda c: (-c[0], c[2], c[1]))
    return out[:limit]


def align_bubble(u: Field, kappa: float | None = None) -> tuple[BubbleParams, float]:
    """Best-matching bubble for a single field and its ``L^2`` correlation.

    Center and scale start from the Morrey scan and are refined by
    maximizing the (full-grid) correlation with the unit profile.
    """
    g = u.grid
    kappa = calibrate_kappa(g).kappa if kappa is None else kappa
    scan = morrey_scan(u)
    c0 = np.asarray(scan.refined_center)
    lam0 = scale_from_scan(scan, g)
    un = u.values / np.linalg.norm(u.values)

    def corr(z):
        lam = _clamp_scale(g, lam0 * np.exp(z[0]))
        w = bubble_profile(g, _wrap(g, c0 + z[1:] * lam0), lam)
        return float(np.dot(un, w) / np.linalg.norm(w))

    res = minimize(lambda z: -corr(z), np.zeros(g.dim + 1), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-15, "maxiter": 800})
    z = res.x if -res.fun >= corr(np.zeros(g.dim + 1)) else np.zeros(g.dim + 1)
    lam = _clamp_scale(g, lam0 * np.exp(z[0]))
    center = tuple(map(float, _wrap(g, c0 + z[1:] * lam0)))
    w = _template(g, center, lam, kappa)
    amp = float(np.dot(u.values, w) / np.dot(w, w))
    return BubbleParams(center, lam, abs(amp) if amp != 0 else 1.0), corr(z)


def _bubble_pair(grid: GridSpec, center, scale, amps, kappa) -> FieldPair:
    t = _template(grid, center, scale, kappa)
    return FieldPair.from_arrays(grid, amps[0] * t, amps[1] * t)


def _make_fit(grid, center, scale, amps, corr, kappa, params) -> BubbleFit:
    energy = energy_I(_bubble_pair(grid, center, scale, amps, kappa), None, params)
    return BubbleFit(tuple(map(float, center)), float(scale),
                     (float(amps[0]), float(amps[1])), float(corr), float(energy))


def _fit_at(pair, center, scale, gs_template, params, kappa, fit_threshold, window):
    """Locate, test and fit one bubble starting from ``(center, scale)``."""
    g = pair.grid
    direction = (gs_template.B, gs_template.C)
    center, scale = _locate(pair, center, _clamp_scale(g, scale), direction, window / 2)
    pearson, slopes = _local_fit(pair, center, scale, direction, window / 2)
    corr = min(fit_correlation(pair, center, scale, direction, window), max(pearson, 0.0))
    if not (g.h <= scale <= g.L / 4):
        corr = 0.0
    if corr < fit_threshold:
        err = NoBubbleError(
            f"template correlation {corr:.4f} at center {center}, scale {scale:.4g} "
            f"is below the threshold {fit_threshold}"
        )
        err.residual = pair
        err.correlation = corr
        raise err
    amps = np.asarray(slopes) / kappa
    t = _template(g, center, scale, kappa)
    u, v = pair.arrays()
    residual = FieldPair.from_arrays(g, u - amps[0] * t, v - amps[1] * t)
    return _make_fit(g, center, scale, amps, corr, kappa, params), residual


def extract_bubble(pair: FieldPair, scan: MorreyScan, gs_template: GroundStatePair,
                   params: SystemParams, *, kappa: float | None = None,
                   fit_threshold: float = 0.95, window: float = 8.0) -> tuple[BubbleFit, FieldPair]:
    """Fit one bubble where ``scan`` locates the concentration and subtract it.

    The start is the refined scan center and the scale implied by the scan
    radius.  Both are refined by maximizing the mean-centered correlation
    with the unit profile on ``|x - c| <= (window/2) * scale``, which ignores
    the slowly varying tails of other profiles.  The fit is accepted when the
    uncentered correlation with ``(B w, C w)`` on ``|x - c| <= window * scale``
    reaches ``fit_threshold`` and the scale is resolved (between one grid
    cell and ``L/4``).  The reported correlation is the smaller of the
    centered and the uncentered one: the first rejects broad profiles that
    merge several bumps, the second rejects sign changes.  Amplitudes are the
    local regression slopes.

    Returns
    -------
    (BubbleFit, residual)

    Raises
    ------
    NoBubbleError
        The correlation is below ``fit_threshold``.  The exception carries
        the untouched input as ``residual``.
    """
    g = pair.grid
    kappa = calibrate_kappa(g).kappa if kappa is None else kappa
    return _fit_at(pair, scan.refined_center, scale_from_scan(scan, g), gs_template, params,
                   kappa, fit_threshold, window)


def _joint_refit(grid, target, fits, gs, params, kappa, opts):
    """Polish each bubble jointly with the others in ``H^s``, then refit all amplitudes."""
    comps = list(target.arrays())
    geo = [(f.center, f.scale) for f in fits]
    for _ in range(opts.refit_sweeps if opts.polish else 0):
        for i in range(len(geo)):
            others = [_template(grid, c, lam, kappa) for j, (c, lam) in enumerate(geo) if j != i]
            geo[i] = _polish(grid, comps, geo[i][0], geo[i][1], kappa, others)
    temps = [_template(grid, c, lam, kappa) for c, lam in geo]
    amps = _amplitudes(grid, comps, temps)
    out = []
    for i, (c, lam) in enumerate(geo):
        others = [sum((amps[j, k] * temps[j] for j in range(len(geo)) if j != i),
                      np.zeros(grid.shape)) for k in range(2)]
        local = FieldPair.from_arrays(grid, comps[0] - others[0], comps[1] - others[1])
        corr = fit_correlation(local, c, lam, (gs.B, gs.C), opts.window)
        out.append(_make_fit(grid, c, lam, amps[i], corr, kappa, params))
    fitted = [sum((amps[j, k] * temps[j] for j in range(len(geo))), np.zeros(grid.shape))
              for k in range(2)]
    residual = FieldPair.from_arrays(grid, comps[0] - fitted[0], comps[1] - fitted[1])
    return out, residual


def separation_matrix(fits) -> np.ndarray:
    """Scores ``|log(r_i/r_j)| + |x_i - x_j| / r_i`` for every ordered pair (diagonal 0).

    Distances are Euclidean in the box coordinates; for well-separated
    bubbles every off-diagonal entry is large.
    """
    k = len(fits)
    S = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                d = np.linalg.norm(np.subtract(fits[i].center, fits[j].center))
                S[i, j] = abs(np.log(fits[i].scale / fits[j].scale)) + d / fits[i].scale
    return S


def _hs_pair_norm(p: FieldPair) -> float:
    g = p.grid
    return float(np.sqrt(max(g.hs(p.u.values) + g.hs(p.v.values), 0.0)))


def profile_decompose(pair: FieldPair, forcing: ForcingPair | None, params: SystemParams,
                      opts: DecomposeOpts | None = None, *, gs_template: GroundStatePair | None = None,
                      kappa: float | None = None, limit: FieldPair | None = None,
                      solver_opts=None) -> Decomposition:
    """Split ``pair`` into limit + bubbles + remainder and close the energy ledger.

    The limit is removed first.  Bubbles are then extracted one at a time
    from the remainder: candidates are the spatial peaks of the Morrey
    functional at every ladder radius, tried in decreasing order of value,
    and the first one passing :func:`extract_bubble`'s test is subtracted.
    The loop ends when the remainder's ``H^s`` norm is below tolerance, no
    candidate passes, or ``max_bubbles`` is reached.  Finally every bubble's
    center and scale are polished jointly with the others and all amplitudes
    are refitted by ``H^s`` least squares.

    Parameters
    ----------
    pair : FieldPair
    forcing : ForcingPair or None
        When nonzero the limit is the first solution of the forced problem
        (computed here unless ``limit`` is given); otherwise it is zero.
    params : SystemParams
    opts : DecomposeOpts
    gs_template : GroundStatePair, optional
        Template amplitudes; by default the critical ground-state amplitudes,
        whose ratio is all that the correlation uses.

    Returns
    -------
    Decomposition
        ``residual_tol`` used is stored in ``tolerance``.
    """
    from .bubbles import critical_amplitude
    from .solvers import find_first_solution

    opts = DecomposeOpts() if opts is None else opts
    g = pair.grid
    kappa = calibrate_kappa(g).kappa if kappa is None else kappa
    if gs_template is None:
        gs_template = GroundStatePair.from_B(
            critical_amplitude(params), BubbleParams(np.zeros(g.dim), 1.0), params)
    forced = forcing is not None and not forcing.is_zero()
    if limit is None:
        limit = find_first_solution(forcing, params, solver_opts).pair if forced else FieldPair.zeros(g)
    target = pair - limit
    tol = opts.residual_tol
    if tol is None:
        tol = opts.rel_tol * _hs_pair_norm(target)
    ratio = bubble_radius_ratio(g.dim, g.s)

    fits: list[BubbleFit] = []
    residual = target
    rnorm = _hs_pair_norm(residual)
    while rnorm > tol and len(fits) < opts.max_bubbles:
        accepted = None
        for _, c, R in _candidates(residual):
            try:
                fit, new_residual = _fit_at(residual, c, R / ratio, gs_template, params, kappa,
                                            opts.fit_threshold, opts.window)
            except NoBubbleError:
                continue
            new_norm = _hs_pair_norm(new_residual)
            if new_norm < rnorm:
                accepted = (fit, new_residual, new_norm)
                break
        if accepted is None:
            log.info("extraction stopped: no candidate passed the bubble test")
            break
        fit, residual, rnorm = accepted
        fits.append(fit)
        log.info("bubble %d: center %s scale %.4g corr %.5f", len(fits), fit.center, fit.scale,
                 fit.fit_correlation)
    if fits:
        fits, residual = _joint_refit(g, target, fits, gs_template, params, kappa, opts)
        rnorm = _hs_pair_norm(residual)
    gamma = energy_I(pair, forcing, params)
    i_lim = energy_I(limit, forcing, params) if forced else 0.0
    i_b = float(sum(f.energy for f in fits))
    ledger = (float(gamma), float(i_lim), i_b, float(gamma - i_lim - i_b))
    dec = Decomposition(limit, fits, residual, rnorm, ledger, separation_matrix(fits),
                        tolerance=float(tol))
    if dec.relative_defect > opts.defect_tol and abs(ledger[3]) > opts.defect_atol:
        msg = (f"energy ledger defect {ledger[3]:.4e} is {dec.relative_defect:.2%} of the input "
               f"energy (tolerance {opts.defect_tol:.2%}); the decomposition is incomplete")
        dec.warnings.append(msg)
        warnings.warn(msg, DecompositionIncompleteWarning, stacklevel=2)
    return dec


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------
def brezis_lieb_defect(pairA: FieldPair, pairB: FieldPair, params: SystemParams) -> float:
    """``|int (|uA+uB|^a |vA+vB|^b - |uA|^a |vA|^b - |uB|^a |vB|^b)|``."""
    if pairA.grid != pairB.grid:
        from .errors import GridMismatchError

        raise GridMismatchError("pairs live on different grids")
    g = pairA.grid
    a, b = params.alpha, params.beta
    uA, vA = pairA.arrays()
    uB, vB = pairB.arrays()
    dens = (np.abs(uA + uB) ** a * np.abs(vA + vB) ** b
            - np.abs(uA) ** a * np.abs(vA) ** b - np.abs(uB) ** a * np.abs(vB) ** b)
    return abs(g.integrate(dens))


def _lp_pair_norm(pair: FieldPair) -> float:
    g = pair.grid
    p = g.two_star
    nu, nv = (g.integrate(np.abs(x) ** p) ** (1.0 / p) for x in pair.arrays())
    return float(np.sqrt(nu * nu + nv * nv))


def interpolation_ratio(pair: FieldPair, theta: float) -> float:
    """``||(u,v)||_{L^2* x L^2*} / (||(u,v)||^theta * ||(u,v)||_Morrey^(1-theta))``.

    Raises
    ------
    ParameterError
        ``theta`` is outside ``[2/2*, 1)``.
    DomainError
        The pair is zero.
    """
    g = pair.grid
    if not 2.0 / g.two_star - 1e-15 <= theta < 1:
        raise ParameterError(f"theta must lie in [2/2*, 1) = [{2 / g.two_star}, 1)")
    hs = float(np.sqrt(max(g.hs(pair.u.values) + g.hs(pair.v.values), 0.0)))
    if hs == 0:
        raise DomainError("interpolation ratio of the zero pair")
    return _lp_pair_norm(pair) / (hs**theta * morrey_pair_norm(pair) ** (1 - theta))


def embedding_ratio(pair: FieldPair) -> float:
    """Morrey pair norm over the ``L^2*`` pair norm (bounded by the embedding constant)."""
    lp = _lp_pair_norm(pair)
    if lp == 0:
        raise DomainError("embedding ratio of the zero pair")
    return morrey_pair_norm(pair) / lp


def decomposition_report(dec: Decomposition) -> dict:
    gamma, i_lim, i_b, defect = dec.energy_ledger
    return {
        "k": dec.k,
        "bubbles": [f.to_dict() for f in dec.bubbles],
        "residual_norm": dec.residual_norm,
        "residual_tol": dec.tolerance,
        "energy_ledger": {
            "gamma_input": gamma,
            "I_limit": i_lim,
            "sum_I_bubbles": i_b,
            "defect": defect,
            "relative_defect": dec.relative_defect,
        },
        "separation": dec.separation.tolist(),
        "warnings": list(dec.warnings),
    }


def write_decomposition(dec: Decomposition, outdir) -> Path:
    """Write ``decomposition.json`` plus the limit and residual fields to ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, p in (("limit", dec.limit_pair), ("residual", dec.residual)):
        save_field(p.u, out / f"{name}_u.bin")
        save_field(p.v, out / f"{name}_v.bin")
    path = out / "decomposition.json"
    path.write_text(json.dumps(decomposition_report(dec), indent=2, sort_keys=True) + "\n")
    return path
