"""Descent and min-max engines.

* :func:`minimize_quotient` -- Sobolev-gradient descent on the scalar or the
  coupled quotient with the dilation and translation directions projected
  out, plus periodic recentering and scale pinning.
* :func:`find_first_solution` -- descent of ``J`` from the origin that must
  stay where ``Psi > 0``.
* :func:`choose_t0` and :func:`mountain_pass` -- the far endpoint and a
  climbing-image string method for the saddle between the two.

Every gradient is the Riesz representative in the ``H^s`` inner product, so
step sizes are mesh independent.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .bubbles import BubbleParams, GroundStatePair, rescale_translate, talenti_bubble
from .errors import (
    BoxTooSmallError,
    ConcentrationWarning,
    DegenerateDirectionError,
    ParameterError,
    PathCollapseError,
    RegionEscapeError,
)
from .functionals import (
    OMEGA1,
    OMEGA2,
    EnergyReport,
    _energy,
    _grad,
    energy_level,
    energy_report,
    forcing_admissible,
    psi_region,
)
from .grid import Field, FieldPair, ForcingPair, GridSpec, SystemParams
from .morrey import morrey_scan

__all__ = [
    "SolverOpts",
    "Solution",
    "MountainPassResult",
    "minimize_quotient",
    "find_first_solution",
    "choose_t0",
    "dilated_bubble",
    "mountain_pass",
    "write_trace",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOpts:
    """Iteration controls shared by the solvers."""

    max_iters: int = 5000
    step_size: float = 0.5
    grad_tol: float = 1e-8
    recenter_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ParameterError("grad_tol must be positive")
        if self.recenter_every < 1:
            raise ParameterError("recenter_every must be at least 1")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be nonnegative")
        if not self.step_size > 0:
            raise ParameterError("step_size must be positive")


@dataclass
class Solution:
    """A computed critical point with its energy report and iteration history."""

    pair: FieldPair
    energy: EnergyReport
    iterations: int
    converged: bool
    history: list = dc_field(default_factory=list)

    def is_positive(self) -> bool:
        u, v = self.pair.arrays()
        return bool(u.min() > 0 and v.min() > 0)


@dataclass
class MountainPassResult:
    """Final path, its maximal energy ``eta`` and the saddle found at the top."""

    path: list
    eta: float
    critical_pair: Solution
    t0: float
    initial_crosses_omega: bool
    omega_crossing_min_J: float
    nodes: int
    iterations: int


def write_trace(path, history, header=("iter", "J", "grad_norm", "region")) -> Path:
    """Append-free CSV dump of a solver history ``[(J, grad_norm, region), ...]``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, (J, gn, reg) in enumerate(history):
            w.writerow([k, repr(float(J)), repr(float(gn)), reg])
    return path


# ---------------------------------------------------------------------------
# quotient minimization
# ---------------------------------------------------------------------------
def _spow(u, q):
    """``|u|^(q-1) sign(u)`` -- the derivative profile of ``|u|^q / q``."""
    return np.sign(u) * np.abs(u) ** (q - 1)


def _symmetry_directions(grid: GridSpec, comps):
    xs = grid.coords()
    a = grid.decay_exponent
    grads = [grid.gradient(c) for c in comps]
    dil = [sum(xs[k] * grads[i][k] for k in range(grid.dim)) + a * comps[i] for i in range(len(comps))]
    trans = [[grads[i][k] for i in range(len(comps))] for k in range(grid.dim)]
    return [dil] + trans


def _project(grid: GridSpec, g, dirs):
    def ip(A, B):
        return sum(grid.hs(x, y) for x, y in zip(A, B))

    basis = []
    for d in dirs:
        d = [np.array(x) for x in d]
        for b in basis:
            c = ip(d, b)
            d = [x - c * y for x, y in zip(d, b)]
        nn = np.sqrt(max(ip(d, d), 0.0))
        if nn > 1e-14:
            basis.append([x / nn for x in d])
    for b in basis:
        c = ip(g, b)
        g = [x - c * y for x, y in zip(g, b)]
    return g


def _recenter(grid: GridSpec, comps, ref_radius, pin_tol=1e-3):
    target = FieldPair.from_arrays(grid, *comps) if len(comps) == 2 else Field(grid, comps[0])
    scan = morrey_scan(target)
    c = np.asarray(scan.refined_center)
    out = []
    for x in comps:
        f = Field(grid, x)
        if np.any(c != 0):
            f = rescale_translate(f, 1.0, -c, check=False)
        out.append(f)
    if ref_radius is not None:
        r = ref_radius / scan.refined_radius
        if abs(np.log(r)) > pin_tol:
            out = [rescale_translate(f, r, None, check=False) for f in out]
    return [f.values.copy() for f in out]


def minimize_quotient(initial, mode: str = "system", opts: SolverOpts | None = None,
                      params: SystemParams | None = None, *, ref_radius: float | None = None,
                      project: bool = True, pin_rtol: float = 1e-9, stats: dict | None = None):
    """Minimize the scalar or coupled quotient by normalized Sobolev-gradient descent.

    Each step moves along ``-(u - (A/B) R[...])``, the Riesz gradient of the
    quotient scaled by ``A = ||.||^2``, after removing its components along
    the dilation generator ``x . grad u + ((N-2s)/2) u`` and the translation
    generators.  Every ``opts.recenter_every`` steps the iterate is translated
    so that the Morrey maximizer sits at the origin and, if ``ref_radius`` is
    given, dilated so that the maximizing radius equals ``ref_radius``.

    Parameters
    ----------
    initial : Field or FieldPair
    mode : {"scalar", "system"}
    opts : SolverOpts
    params : SystemParams
        Required in system mode.
    ref_radius : float, optional
        Morrey radius to pin the dilation orbit to.
    pin_rtol : float
        With pinning active the descent also stops once the quotient measured
        right after two consecutive pins agrees to this relative tolerance.
        On a finite box the quotient keeps decreasing slowly along the
        (no longer exact) dilation orbit, so the projected gradient need not
        fall below ``grad_tol`` while the pinned value has long converged.
    stats : dict, optional
        Filled with ``iterations``, ``grad_norm``, ``converged`` and ``history``.

    Returns
    -------
    (minimizer, value)
        The final iterate and its quotient, an upper bound on the discrete
        infimum.
    """
    opts = SolverOpts() if opts is None else opts
    if mode not in ("scalar", "system"):
        raise ParameterError("mode must be 'scalar' or 'system'")
    if mode == "system":
        if params is None:
            raise ParameterError("system mode needs SystemParams")
        if not isinstance(initial, FieldPair):
            raise ParameterError("system mode needs a FieldPair")
        grid = initial.grid
        comps = [initial.u.values.copy(), initial.v.values.copy()]
    else:
        if isinstance(initial, FieldPair):
            initial = initial.u
        grid = initial.grid
        comps = [initial.values.copy()]
    p = grid.two_star
    A0 = sum(grid.hs(c) for c in comps)
    if A0 <= 0:
        raise ParameterError("initial iterate must be nonzero")

    def quotient_and_grad(cs):
        A = sum(grid.hs(c) for c in cs)
        if mode == "scalar":
            (u,) = cs
            Bc = grid.integrate(np.abs(u) ** p)
            if Bc <= 0:
                raise DegenerateDirectionError("L^2* norm vanished during descent")
            g = [u - (A / Bc) * grid.riesz(_spow(u, p))]
        else:
            u, v = cs
            a, b = params.alpha, params.beta
            Bc = grid.integrate(np.abs(u) ** a * np.abs(v) ** b)
            if not Bc > 1e-300:
                raise DegenerateDirectionError(
                    f"coupling integral collapsed to {Bc:.3e}; the iterate lost overlap between u and v"
                )
            g = [
                u - (A / Bc) * (a / p) * grid.riesz(_spow(u, a) * np.abs(v) ** b),
                v - (A / Bc) * (b / p) * grid.riesz(np.abs(u) ** a * _spow(v, b)),
            ]
        return A / Bc ** (2.0 / p), g, A

    history = []
    converged = False
    it = 0
    r = np.inf
    q_pin = None
    for it in range(opts.max_iters + 1):
        Q, g, A = quotient_and_grad(comps)
        if ref_radius is not None and it > 0 and it % opts.recenter_every == 0:
            if q_pin is not None and abs(Q - q_pin) <= pin_rtol * abs(Q):
                history.append((Q, r, "pinned"))
                converged = True
                break
            q_pin = Q
        if project:
            g = _project(grid, g, _symmetry_directions(grid, comps))
        r = float(np.sqrt(max(sum(grid.hs(x) for x in g), 0.0) / A))
        history.append((Q, r, "-"))
        if r < opts.grad_tol:
            converged = True
            break
        if it == opts.max_iters:
            break
        comps = [c - opts.step_size * x for c, x in zip(comps, g)]
        An = sum(grid.hs(c) for c in comps)
        comps = [c * np.sqrt(A0 / An) for c in comps]
        if (it + 1) % opts.recenter_every == 0:
            comps = _recenter(grid, comps, ref_radius)
    Q, _, _ = quotient_and_grad(comps)
    if stats is not None:
        stats.update(iterations=it, grad_norm=r, converged=converged, history=history,
                     pinned_value=q_pin)
    if mode == "scalar":
        return Field(grid, comps[0]), float(Q)
    return FieldPair.from_arrays(grid, comps[0], comps[1]), float(Q)


# ---------------------------------------------------------------------------
# first solution
# ---------------------------------------------------------------------------
def find_first_solution(forcing: ForcingPair, params: SystemParams, opts: SolverOpts | None = None,
                        *, sab_estimate: float | None = None, min_step: float = 1e-6,
                        trace_path=None) -> Solution:
    """Sobolev-gradient descent of ``J`` from the origin inside ``{Psi > 0}``.

    A step is accepted only if ``J`` does not increase and the new iterate is
    tagged ``Omega1``; otherwise the step is halved.

    Raises
    ------
    RegionEscapeError
        The step fell below ``min_step`` without an acceptable iterate.
    ParameterError
        ``sab_estimate`` was given and the forcing is not admissible.
    """
    opts = SolverOpts(step_size=1.0) if opts is None else opts
    grid = forcing.grid
    if sab_estimate is not None and not forcing_admissible(forcing, sab_estimate):
        raise ParameterError("forcing is above the admissibility threshold")
    f, g = forcing.f.values, forcing.g.values
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)
    J = 0.0
    history = []
    converged = False
    it = 0
    for it in range(opts.max_iters + 1):
        gu, gv = _grad(grid, u, v, f, g, params)
        gn = float(np.sqrt(max(grid.hs(gu) + grid.hs(gv), 0.0)))
        tag = psi_region(FieldPair.from_arrays(grid, u, v), params).tag
        history.append((J, gn, tag))
        if gn < opts.grad_tol:
            converged = True
            break
        if it == opts.max_iters:
            break
        t = opts.step_size
        while True:
            nu, nv = u - t * gu, v - t * gv
            ntag = psi_region(FieldPair.from_arrays(grid, nu, nv), params).tag
            nJ = _energy(grid, nu, nv, f, g, params, positive=True)
            if ntag == OMEGA1 and nJ <= J + 1e-12 * max(1.0, abs(J)):
                break
            t *= 0.5
            if t < min_step:
                raise RegionEscapeError(
                    f"iterate {it} cannot stay in Omega1 with a step above {min_step}; "
                    "the forcing is too large for the discrete problem"
                )
        u, v, J = nu, nv, nJ
    pair = FieldPair.from_arrays(grid, u, v)
    sol = Solution(pair, energy_report(pair, forcing, params), it, converged, history)
    if trace_path is not None:
        write_trace(trace_path, history)
    return sol


# ---------------------------------------------------------------------------
# far endpoint
# ---------------------------------------------------------------------------
def dilated_bubble(gs: GroundStatePair, t: float, grid: GridSpec, kappa=None) -> FieldPair:
    """``(B w(x/t), C w(x/t))`` with ``w`` the profile of ``gs`` (dilation about its center).

    ``w_lam(x/t) = t^((N-2s)/2) w_{lam t}(x)``, so the amplitude grows with
    ``t`` while the shape widens.
    """
    if t == 0:
        return FieldPair.zeros(grid)
    lam = gs.bubble.scale * t
    if lam > grid.L / 4:
        raise BoxTooSmallError(f"dilated scale {lam:.4g} exceeds L/4 = {grid.L / 4:.4g}")
    w = talenti_bubble(BubbleParams(gs.bubble.center, lam, gs.bubble.amplitude * t**grid.decay_exponent),
                       grid, kappa)
    return FieldPair(w * gs.B, w * gs.C)


def choose_t0(u0v0: FieldPair, gs: GroundStatePair, params: SystemParams,
              forcing: ForcingPair | None = None, *, kappa=None, t_start: float = 1.0,
              stats: dict | None = None) -> float:
    """Double ``t`` from ``t_start`` until ``Psi < 0`` and ``J < J(u0, v0)`` at ``u0v0 + bubble_t``.

    ``stats["flags"]`` receives ``(t, psi_negative, energy_below)`` for every
    probed ``t``.

    Raises
    ------
    BoxTooSmallError
        The dilated bubble no longer fits in the box.
    """
    grid = u0v0.grid
    f, g = (None, None) if forcing is None else (forcing.f.values, forcing.g.values)
    u0, v0 = u0v0.arrays()
    J0 = _energy(grid, u0, v0, f, g, params, positive=True)
    flags = []
    t = float(t_start)
    while True:
        b = dilated_bubble(gs, t, grid, kappa)
        pair = u0v0 + b
        psi_neg = psi_region(pair, params, tol_psi=0.0).tag == OMEGA2
        below = _energy(grid, *pair.arrays(), f, g, params, positive=True) < J0
        flags.append((t, bool(psi_neg), bool(below)))
        if stats is not None:
            stats["flags"] = list(flags)
        if psi_neg and below:
            return t
        t *= 2.0


# ---------------------------------------------------------------------------
# mountain pass
# ---------------------------------------------------------------------------
def _path_energy(grid, X, f, g, params):
    """Energies of every node of a path array with shape ``(P, 2, *grid)``."""
    a, b, p = params.alpha, params.beta, params.two_star
    hs = grid.hs_batch(X)
    quad = 0.5 * (hs[:, 0] + hs[:, 1])
    up = np.maximum(X[:, 0], 0.0)
    vp = np.maximum(X[:, 1], 0.0)
    cpl = grid.integrate_batch(up**a * vp**b)
    lin = grid.integrate_batch(f * X[:, 0]) + grid.integrate_batch(g * X[:, 1])
    return quad - cpl / p - lin


def _path_grad(grid, X, f, g, params):
    a, b, p = params.alpha, params.beta, params.two_star
    up = np.maximum(X[:, 0], 0.0)
    vp = np.maximum(X[:, 1], 0.0)
    R = np.empty_like(X)
    R[:, 0] = (a / p) * up ** (a - 1) * vp**b + f
    R[:, 1] = (b / p) * up**a * vp ** (b - 1) + g
    return X - grid.ifft(grid.inverse_multiplier * grid.fft(R))


def _path_psi(grid, X, params):
    a, b, p = params.alpha, params.beta, params.two_star
    hs = grid.hs_batch(X)
    cpl = grid.integrate_batch(np.abs(X[:, 0]) ** a * np.abs(X[:, 1]) ** b)
    return hs[:, 0] + hs[:, 1] - (p - 1) * cpl


def _ip(grid, A, B):
    """Product inner product of two (2, *grid) arrays."""
    Ah, Bh = grid.fft(A), grid.fft(B)
    return float(np.sum((Ah * np.conj(Bh)).real * grid.multiplier * grid.half_weights)) * grid.spectral_scale


def _reparametrize(grid, X, lo, hi):
    seg = X[lo : hi + 1]
    if len(seg) < 3:
        return
    d = np.sqrt(np.maximum(grid.hs_batch(seg[1:] - seg[:-1]).sum(axis=1), 0.0))
    arc = np.concatenate([[0.0], np.cumsum(d)])
    if arc[-1] <= 0:
        return
    target = np.linspace(0.0, arc[-1], len(seg))
    new = seg.copy()
    for k in range(1, len(seg) - 1):
        j = int(np.clip(np.searchsorted(arc, target[k]) - 1, 0, len(seg) - 2))
        span = arc[j + 1] - arc[j]
        w = 0.0 if span <= 0 else (target[k] - arc[j]) / span
        new[k] = (1 - w) * seg[j] + w * seg[j + 1]
    X[lo : hi + 1] = new


def _omega_crossings(grid, X, f, g, params, iters=40):
    """Energies at the points where ``Psi`` changes sign between adjacent nodes."""
    psi = _path_psi(grid, X, params)
    out = []
    for k in range(len(X) - 1):
        if psi[k] == 0:
            out.append(float(_path_energy(grid, X[k : k + 1], f, g, params)[0]))
        elif psi[k] * psi[k + 1] < 0:
            lo, hi = 0.0, 1.0
            plo = psi[k]
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                Y = ((1 - mid) * X[k] + mid * X[k + 1])[None]
                pm = _path_psi(grid, Y, params)[0]
                if np.sign(pm) == np.sign(plo):
                    lo, plo = mid, pm
                else:
                    hi = mid
            Y = ((1 - lo) * X[k] + lo * X[k + 1])[None]
            out.append(float(_path_energy(grid, Y, f, g, params)[0]))
    return out


def mountain_pass(u0v0: FieldPair, endpoint: FieldPair | None, forcing: ForcingPair,
                  params: SystemParams, opts: SolverOpts | None = None, *,
                  gs: GroundStatePair | None = None, t0: float | None = None, kappa=None,
                  nodes: int = 33, dt: float = 0.1, max_node_step: float = 0.05,
                  reparam_every: int = 5, sab_estimate: float | None = None,
                  max_restarts: int = 2, trace_path=None) -> MountainPassResult:
    """Climbing-image string method between ``u0v0`` and a lower far endpoint.

    The path starts on ``r -> u0v0 + bubble_{r t0}`` (or on the straight
    segment to ``endpoint`` if no ground-state data is given).  Interior nodes
    follow the component of ``-grad J`` normal to the path; the highest node
    climbs along the tangent instead, so it converges to a saddle.  Each step
    is capped at ``max_node_step`` in the product norm, and the two halves of
    the path are redistributed at equal arc length every ``reparam_every``
    iterations.

    Returns
    -------
    MountainPassResult

    Raises
    ------
    ConcentrationWarning
        ``eta`` is not strictly between ``c0`` and ``c0 + (s/N) S_ab^(N/2s)``.
    PathCollapseError
        Interior nodes collapsed onto an endpoint on every restart.
    """
    opts = SolverOpts(max_iters=20000, grad_tol=1e-8) if opts is None else opts
    grid = u0v0.grid
    f, g = forcing.f.values, forcing.g.values
    u0, v0 = u0v0.arrays()
    start = np.stack([u0, v0])
    if gs is not None and t0 is not None:
        end_pair = u0v0 + dilated_bubble(gs, t0, grid, kappa)
    elif endpoint is not None:
        end_pair = endpoint
    else:
        raise ParameterError("give either an endpoint or ground-state data with t0")
    end = np.stack(end_pair.arrays())
    c0 = float(_path_energy(grid, start[None], f, g, params)[0])
    if not _path_energy(grid, end[None], f, g, params)[0] < c0:
        raise ParameterError("the far endpoint must have lower energy than the first solution")

    P = int(nodes)
    for attempt in range(max_restarts + 1):
        rs = np.linspace(0.0, 1.0, P)
        if gs is not None and t0 is not None:
            X = np.stack([start + (np.stack(dilated_bubble(gs, r * t0, grid, kappa).arrays()))
                          for r in rs])
        else:
            X = np.stack([(1 - r) * start + r * end for r in rs])
        X[-1] = end
        psi0 = _path_psi(grid, X, params)
        crosses = bool(np.any(np.abs(psi0) <= 1e-8 * grid.hs_batch(X).sum(axis=1))
                       or np.any(psi0[:-1] * psi0[1:] < 0))
        history = []
        converged = False
        it = 0
        span = np.sqrt(_ip(grid, end - start, end - start))
        for it in range(opts.max_iters + 1):
            Js = _path_energy(grid, X, f, g, params)
            c = int(np.argmax(Js[1:-1])) + 1
            G = _path_grad(grid, X, f, g, params)
            gnorm = float(np.sqrt(max(_ip(grid, G[c], G[c]), 0.0)))
            history.append((float(Js[c]), gnorm, psi_region(
                FieldPair.from_arrays(grid, X[c, 0], X[c, 1]), params).tag))
            if gnorm < opts.grad_tol:
                converged = True
                break
            if it == opts.max_iters:
                break
            for i in range(1, P - 1):
                tg = X[i + 1] - X[i - 1]
                tn = np.sqrt(max(_ip(grid, tg, tg), 1e-300))
                tg = tg / tn
                comp = _ip(grid, G[i], tg)
                step = G[i] - (2.0 if i == c else 1.0) * comp * tg
                nrm = np.sqrt(max(_ip(grid, step, step), 0.0))
                X[i] -= dt * step * min(1.0, max_node_step / (dt * nrm + 1e-300))
            if it % reparam_every == 0:
                _reparametrize(grid, X, 0, c)
                _reparametrize(grid, X, c, P - 1)
        d_start = np.sqrt(np.maximum(grid.hs_batch(X[1:-1] - start).sum(axis=1), 0.0))
        d_end = np.sqrt(np.maximum(grid.hs_batch(X[1:-1] - end).sum(axis=1), 0.0))
        if np.all(np.minimum(d_start, d_end) < 1e-6 * span):
            log.warning("path collapsed onto an endpoint; restarting with %d nodes", 2 * P)
            P *= 2
            continue
        break
    else:
        raise PathCollapseError("path collapsed on every restart")

    Js = _path_energy(grid, X, f, g, params)
    c = int(np.argmax(Js[1:-1])) + 1
    eta = float(Js.max())
    pair = FieldPair.from_arrays(grid, X[c, 0], X[c, 1])
    sol = Solution(pair, energy_report(pair, forcing, params), it, converged, history)
    crossings = _omega_crossings(grid, X, f, g, params)
    path = [FieldPair.from_arrays(grid, x[0], x[1]) for x in X]
    if trace_path is not None:
        write_trace(trace_path, history)
    if not eta > c0:
        raise ConcentrationWarning(f"mountain-pass level {eta!r} is not above c0 = {c0!r}")
    if sab_estimate is not None:
        bound = c0 + energy_level(grid, sab_estimate)
        if not eta < bound:
            raise ConcentrationWarning(
                f"mountain-pass level {eta!r} reached the bubbling bound {bound!r}"
            )
    return MountainPassResult(
        path=path,
        eta=eta,
        critical_pair=sol,
        t0=float(t0) if t0 is not None else float("nan"),
        initial_crosses_omega=crosses,
        omega_crossing_min_J=min(crossings) if crossings else float("nan"),
        nodes=P,
        iterations=it,
    )
