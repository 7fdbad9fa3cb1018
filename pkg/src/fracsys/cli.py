"""Command-line runner: ``fracsys {constants,ground_state,two_solutions,decompose,verify}``.

Each subcommand reads a YAML configuration (see :mod:`fracsys.config`), writes
``<command>.json`` plus traces and fields to the output directory, and keeps
run metadata (timestamps, host, timings) in ``<command>.meta.json`` so that
the report itself is byte-identical for identical configuration and seed.

Exit codes: 0 success, 2 configuration or precondition error, 3 solver
non-convergence, 4 invariant failure.  On a nonzero exit a
``<command>.FAILED`` marker with the reason is left next to whatever partial
output was produced.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bubbles import (
    BubbleParams,
    GroundStatePair,
    calibrate_kappa,
    critical_amplitude,
    ground_state_pair,
    rescale_translate,
)
from .config import RunConfig, build_forcing, load_config
from .decomposition import (
    DecomposeOpts,
    align_bubble,
    brezis_lieb_defect,
    decomposition_report,
    embedding_ratio,
    interpolation_ratio,
    profile_decompose,
    write_decomposition,
)
from .errors import (
    BoxTooSmallError,
    ConcentrationWarning,
    ConfigError,
    ConvergenceError,
    DegenerateDirectionError,
    FracsysError,
    MuOutOfRangeError,
    NoBubbleError,
    ParameterError,
    PathCollapseError,
    RegionEscapeError,
)
from .functionals import (
    OMEGA1,
    admissibility_threshold,
    c0_threshold,
    energy_level,
    h_tau,
    lemma_S_factor,
    lemma_S_factor_minimum,
    splitting_constant,
    splitting_margin,
    tau0_solve,
    weak_residual,
)
from .grid import FieldPair, coupling_integral, dual_norm, gaussian_bump, load_field, save_field, set_workers
from .morrey import bubble_radius_ratio, morrey_value
from .solvers import SolverOpts, choose_t0, find_first_solution, minimize_quotient, mountain_pass, write_trace

__all__ = [
    "main",
    "cmd_constants",
    "cmd_ground_state",
    "cmd_two_solutions",
    "cmd_decompose",
    "cmd_verify",
    "InvariantFailure",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_SOLVER",
    "EXIT_INVARIANT",
]

log = logging.getLogger("fracsys")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4
REPORT_VERSION = 1


class InvariantFailure(FracsysError, RuntimeError):
    """At least one gated check of ``verify`` failed."""


class _Run:
    """Output bookkeeping for one subcommand."""

    def __init__(self, name: str, cfg: RunConfig):
        self.name = name
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.marker = self.out / f"{name}.FAILED"
        if self.marker.exists():
            self.marker.unlink()
        self.started = datetime.now(timezone.utc)
        self.t0 = time.perf_counter()
        self.files: list[str] = []

    def path(self, filename: str) -> Path:
        self.files.append(filename)
        return self.out / filename

    def save_pair(self, pair: FieldPair, stem: str) -> None:
        save_field(pair.u, self.path(f"{stem}_u.bin"), {"command": self.name})
        save_field(pair.v, self.path(f"{stem}_v.bin"), {"command": self.name})

    def report(self, convention_free: dict, convention_dependent: dict, status: str = "ok",
               extra: dict | None = None) -> dict:
        rep = {
            "report_version": REPORT_VERSION,
            "command": self.name,
            "status": status,
            "config": {k: v for k, v in self.cfg.echo().items() if k != "output_dir"},
            "convention_free": _jsonable(convention_free),
            "convention_dependent": _jsonable(convention_dependent),
        }
        if extra:
            rep.update(_jsonable(extra))
        text = json.dumps(rep, indent=2, sort_keys=True, allow_nan=True) + "\n"
        (self.out / f"{self.name}.json").write_text(text)
        self.metadata()
        return rep

    def metadata(self) -> None:
        meta = {
            "command": self.name,
            "started_utc": self.started.isoformat(),
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "wall_seconds": time.perf_counter() - self.t0,
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "host": platform.node(),
            "config_source": self.cfg.source,
            "output_dir": str(self.out.resolve()),
            "files": sorted(set(self.files)),
        }
        (self.out / f"{self.name}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def fail(self, code: int, message: str) -> None:
        self.marker.write_text(f"exit {code}\n{message}\n")
        self.metadata()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _solver_opts(cfg: RunConfig, **over) -> SolverOpts:
    s = dict(cfg.section("solver"))
    s.update(over)
    return SolverOpts(seed=cfg.seed, **s)


def _pinned_radius(cfg: RunConfig) -> float:
    return bubble_radius_ratio(cfg.grid.dim, cfg.grid.s) * cfg.section("quotient")["ref_scale"]


def _gaussian_pair(cfg: RunConfig, center=0.0, width=None) -> FieldPair:
    g = cfg.grid
    w = cfg.section("quotient")["initial_width"] if width is None else width
    b = gaussian_bump(g, center, w).values
    return FieldPair.from_arrays(g, b, cfg.params.tau * b)


def _coupled_constant(cfg: RunConfig, initial: FieldPair | None = None, stats=None):
    """Pinned minimization of the coupled quotient; returns ``(minimizer, value)``."""
    init = _gaussian_pair(cfg) if initial is None else initial
    return minimize_quotient(init, "system", _solver_opts(cfg), cfg.params,
                             ref_radius=_pinned_radius(cfg), stats=stats)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------
def cmd_constants(cfg: RunConfig) -> dict:
    """Critical exponent, ``C0``, the coupling factor, a ``tau_0`` table and an ``h`` curve."""
    run = _Run("constants", cfg)
    g, P = cfg.grid, cfg.params
    sec = cfg.section("constants")
    F = lemma_S_factor(P.alpha, P.beta)
    Fnum, targ = lemma_S_factor_minimum(P.alpha, P.beta)
    table = []
    for mu in sec["mu"]:
        try:
            t0 = tau0_solve(mu, P)
            table.append({"mu": mu, "tau0": t0, "h_tau0": h_tau(t0, mu, P)})
        except MuOutOfRangeError as exc:
            table.append({"mu": mu, "tau0": None, "error": str(exc)})
    tau_vals = [r["tau0"] for r in sorted(table, key=lambda r: r["mu"]) if r["tau0"] is not None]
    mu_c = sec["h_curve_mu"]
    taus = np.linspace(sec["h_curve_tau_max"] / sec["h_curve_points"], sec["h_curve_tau_max"],
                       sec["h_curve_points"])
    with open(run.path("constants_h_curve.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "h"])
        for t, h in zip(taus, h_tau(taus, mu_c, P)):
            w.writerow([repr(float(t)), repr(float(h))])
    free = {
        "two_star": g.two_star,
        "C0": c0_threshold(g, P),
        "coupling_factor": F,
        "coupling_factor_numeric": Fnum,
        "coupling_factor_argmin": targ,
        "sqrt_beta_over_alpha": P.tau,
        "tau0_table": table,
        "tau0_decreasing_in_mu": bool(all(a >= b for a, b in zip(tau_vals, tau_vals[1:]))),
        "h_curve_mu": mu_c,
    }
    dep = {"kappa": calibrate_kappa(g).to_dict()}
    return run.report(free, dep)


# ---------------------------------------------------------------------------
# ground state
# ---------------------------------------------------------------------------
def _ratio_stats(pair: FieldPair, level: float = 0.01):
    u, v = pair.arrays()
    mask = u > level * u.max()
    r = v[mask] / u[mask]
    return float(r.min()), float(r.max())


def cmd_ground_state(cfg: RunConfig) -> dict:
    """Scalar and coupled quotient minimization, the coupling ratio and the profile checks."""
    run = _Run("ground_state", cfg)
    g, P = cfg.grid, cfg.params
    rng = np.random.default_rng(cfg.seed)
    R0 = _pinned_radius(cfg)
    opts = _solver_opts(cfg)
    st_s: dict = {}
    w0 = gaussian_bump(g, 0.0, cfg.section("quotient")["initial_width"])
    scal, Qs = minimize_quotient(w0, "scalar", opts, ref_radius=R0, stats=st_s)
    write_trace(run.path("ground_state_scalar_trace.csv"), st_s["history"],
                header=("iter", "quotient", "grad_norm", "region"))
    runs = []
    best = None
    for k in range(cfg.section("quotient")["restarts"]):
        if k == 0:
            init = _gaussian_pair(cfg)
        else:
            comps = []
            for _ in range(2):
                c = rng.uniform(-3, 3, size=(3, g.dim))
                amp = rng.uniform(0.5, 2.0, size=3)
                wid = rng.uniform(0.5, 2.0, size=3)
                comps.append(sum(amp[j] * gaussian_bump(g, c[j], wid[j]).values for j in range(3)))
            init = FieldPair.from_arrays(g, *comps)
        st: dict = {}
        pair, Q = minimize_quotient(init, "system", opts, P, ref_radius=R0, stats=st)
        rmin, rmax = _ratio_stats(pair)
        _, corr = align_bubble(pair.u)
        runs.append({"quotient": Q, "iterations": st["iterations"], "converged": st["converged"],
                     "ratio_min": rmin, "ratio_max": rmax, "bubble_correlation": corr})
        if k == 0:
            write_trace(run.path("ground_state_system_trace.csv"), st["history"],
                        header=("iter", "quotient", "grad_norm", "region"))
        if best is None or Q < best[1]:
            best = (pair, Q)
    run.save_pair(best[0], "ground_state")
    Qab = best[1]
    F = lemma_S_factor(P.alpha, P.beta)
    free = {
        "coupling_ratio": Qab / Qs,
        "coupling_factor": F,
        "coupling_ratio_relative_error": abs(Qab / Qs / F - 1.0),
        "component_ratio_target": P.tau,
        "runs": [{k: v for k, v in r.items() if k != "quotient"} for r in runs],
        "scalar_converged": st_s["converged"],
    }
    dep = {
        "S_discrete": Qs,
        "S_ab_discrete": Qab,
        "S_ab_per_run": [r["quotient"] for r in runs],
        "energy_level": energy_level(g, Qab),
        "pinned_radius": R0,
    }
    status = "ok" if st_s["converged"] and all(r["converged"] for r in runs) else "not_converged"
    rep = run.report(free, dep, status)
    if status != "ok":
        raise ConvergenceError("quotient minimization did not converge")
    return rep


# ---------------------------------------------------------------------------
# two solutions
# ---------------------------------------------------------------------------
def _unit_test_pairs(cfg: RunConfig, n: int, rng) -> list:
    g = cfg.grid
    out = []
    for _ in range(n):
        comps = [gaussian_bump(g, rng.uniform(-g.L / 8, g.L / 8, size=g.dim), rng.uniform(0.3, 3.0)).values
                 * rng.choice([-1.0, 1.0]) for _ in range(2)]
        p = FieldPair.from_arrays(g, *comps)
        nrm = np.sqrt(g.hs(comps[0]) + g.hs(comps[1]))
        out.append(p * (1.0 / nrm))
    return out


def _asymmetry(pair: FieldPair) -> float:
    g = pair.grid
    u, v = pair.arrays()
    return float(np.sqrt(g.hs(u - v)) / np.sqrt(g.hs(u) + g.hs(v)))


def two_solutions_pipeline(cfg: RunConfig, forcing=None, sab=None, run: _Run | None = None) -> dict:
    """First solution, far endpoint and mountain pass; returns a dict of results."""
    g, P = cfg.grid, cfg.params
    sec = cfg.section("two_solutions")
    if sab is None:
        _, sab = _coupled_constant(cfg)
    forcing = build_forcing(cfg, sab) if forcing is None else forcing
    thr = admissibility_threshold(g, sab)
    dn = max(dual_norm(forcing.f), dual_norm(forcing.g))
    if not dn < thr:
        raise ConfigError(
            f"forcing is not admissible: max dual norm {dn:.6g} is not below the threshold "
            f"C0 * S_ab^(N/4s) = {thr:.6g}"
        )
    first = find_first_solution(
        forcing, P, _solver_opts(cfg, step_size=1.0, grad_tol=sec["first_grad_tol"]),
        sab_estimate=sab, trace_path=run.path("two_solutions_first_trace.csv") if run else None)
    if not first.converged:
        raise ConvergenceError(f"first solution did not converge (grad {first.energy.grad_norm:.3e})")
    gs = GroundStatePair.from_B(critical_amplitude(P), BubbleParams(np.zeros(g.dim), sec["template_scale"]), P)
    st: dict = {}
    t0 = choose_t0(first.pair, gs, P, forcing, stats=st)
    mp = mountain_pass(
        first.pair, None, forcing, P,
        SolverOpts(max_iters=sec["max_iters"], grad_tol=sec["grad_tol"], seed=cfg.seed),
        gs=gs, t0=t0, nodes=sec["nodes"], dt=sec["dt"], max_node_step=sec["max_node_step"],
        sab_estimate=sab, trace_path=run.path("two_solutions_mountain_pass_trace.csv") if run else None)
    rng = np.random.default_rng(cfg.seed)
    tests = _unit_test_pairs(cfg, sec["weak_tests"], rng)
    second = mp.critical_pair
    w1 = max(abs(weak_residual(first.pair, forcing, P, t)) for t in tests)
    w2 = max(abs(weak_residual(second.pair, forcing, P, t)) for t in tests)
    u1, v1 = first.pair.arrays()
    u2, v2 = second.pair.arrays()
    dist = np.sqrt(g.hs(u1 - u2) + g.hs(v1 - v2)) / np.sqrt(g.hs(u1) + g.hs(v1))
    c0 = first.energy.J_value
    level = energy_level(g, sab)
    return {
        "first": first, "mountain_pass": mp, "forcing": forcing, "sab": sab, "threshold": thr,
        "dual_norm": dn, "t0": t0, "t0_flags": st.get("flags", []),
        "free": {
            "forcing_fraction_of_threshold": dn / thr,
            "first_converged": first.converged,
            "first_regions": sorted({h[2] for h in first.history}),
            "first_region_always_omega1": all(h[2] == OMEGA1 for h in first.history),
            "first_energy_negative": c0 < 0,
            "second_converged": second.converged,
            "second_region": second.energy.region.tag,
            "eta_above_c0": mp.eta > c0,
            "eta_below_bound": mp.eta < c0 + level,
            "relative_distance": float(dist),
            "first_positive": first.is_positive(),
            "second_positive": second.is_positive(),
            "weak_residual_first": w1,
            "weak_residual_second": w2,
            "asymmetry_first": _asymmetry(first.pair),
            "asymmetry_second": _asymmetry(second.pair),
            "initial_path_crosses_omega": mp.initial_crosses_omega,
            "t0": t0,
        },
        "dependent": {
            "S_ab_discrete": sab,
            "threshold": thr,
            "c0": c0,
            "eta": mp.eta,
            "eta_upper_bound": c0 + level,
            "energy_level": level,
            "first_grad_norm": first.energy.grad_norm,
            "second_grad_norm": second.energy.grad_norm,
            "omega_crossing_min_J": mp.omega_crossing_min_J,
            "path_nodes": mp.nodes,
            "path_iterations": mp.iterations,
        },
    }


def cmd_two_solutions(cfg: RunConfig) -> dict:
    """Run the two-solution pipeline and write both solutions, traces and the report."""
    run = _Run("two_solutions", cfg)
    res = two_solutions_pipeline(cfg, run=run)
    run.save_pair(res["first"].pair, "two_solutions_first")
    run.save_pair(res["mountain_pass"].critical_pair.pair, "two_solutions_second")
    ok = res["first"].converged and res["mountain_pass"].critical_pair.converged
    rep = run.report(res["free"], res["dependent"], "ok" if ok else "not_converged")
    if not ok:
        raise ConvergenceError("the mountain-pass saddle did not converge")
    return rep


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------
def _decompose_input(cfg: RunConfig):
    g, P = cfg.grid, cfg.params
    sec = cfg.section("decompose")
    if sec["input_u"] is not None:
        u, v = load_field(sec["input_u"]), load_field(sec["input_v"])
        if u.grid != g or v.grid != g:
            raise ConfigError("decompose input fields were stored on a different grid")
        return FieldPair(u, v)
    B = critical_amplitude(P)
    pair = FieldPair.zeros(g)
    for b in sec["bubbles"]:
        try:
            pair = pair + ground_state_pair(B * b["amplitude"], BubbleParams(b["center"], b["scale"]), P, g)
        except FracsysError as exc:
            raise ConfigError(f"decompose.bubbles: {exc}") from exc
    return pair


def cmd_decompose(cfg: RunConfig) -> dict:
    """Decompose the configured input into limit, bubbles and remainder."""
    run = _Run("decompose", cfg)
    P = cfg.params
    sec = cfg.section("decompose")
    pair = _decompose_input(cfg)
    forcing = None
    limit = None
    if sec["include_limit"]:
        _, sab = _coupled_constant(cfg)
        forcing = build_forcing(cfg, sab)
        first = find_first_solution(forcing, P, _solver_opts(cfg, step_size=1.0), sab_estimate=sab)
        limit = first.pair
        pair = pair + limit
    opts = DecomposeOpts(max_bubbles=sec["max_bubbles"], fit_threshold=sec["fit_threshold"],
                         defect_tol=sec["defect_tol"], rel_tol=sec["rel_tol"])
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dec = profile_decompose(pair, forcing, P, opts, limit=limit)
    write_decomposition(dec, run.out / "decompose_fields")
    run.files.append("decompose_fields/")
    body = decomposition_report(dec)
    free = {
        "k": body["k"],
        "fit_correlations": [b["fit_correlation"] for b in body["bubbles"]],
        "scales": [b["scale"] for b in body["bubbles"]],
        "centers": [b["center"] for b in body["bubbles"]],
        "amplitude_ratios": [b["amplitudes"][0] / b["amplitudes"][1] for b in body["bubbles"]],
        "amplitude_ratio_target": 1.0 / P.tau,
        "separation": body["separation"],
        "relative_defect": body["energy_ledger"]["relative_defect"],
        "warnings": body["warnings"],
    }
    dep = {
        "energy_ledger": body["energy_ledger"],
        "bubble_energies": [b["energy"] for b in body["bubbles"]],
        "amplitudes": [b["amplitudes"] for b in body["bubbles"]],
        "residual_norm": body["residual_norm"],
        "residual_tol": body["residual_tol"],
    }
    return run.report(free, dep)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------
def _golden_min(fun, a, b, tol=1e-15, maxiter=400):
    """Golden-section search in extended precision, independent of the root-based solver.

    ``fun`` must accept ``np.longdouble`` arguments; the wider mantissa keeps
    the bracket shrinking well below the ``sqrt(eps)`` floor that a flat
    minimum imposes in double precision.
    """
    ld = np.longdouble
    a, b = ld(a), ld(b)
    invphi = (np.sqrt(ld(5)) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return float((a + b) / 2)


def _h_extended(mu: float, params):
    ld = np.longdouble
    mu, beta, e = ld(mu), ld(params.beta), ld(2) / ld(params.two_star)
    return lambda t: (1 + t * t) / (mu + t**beta) ** e


def _checks(cfg: RunConfig) -> tuple[list, dict]:
    """Run the gated invariants; returns ``(checks, informational)``."""
    g, P = cfg.grid, cfg.params
    rng = np.random.default_rng(cfg.seed)
    checks = []

    def check(name, passed, value=None, bound=None):
        checks.append({"name": name, "passed": bool(passed), "value": value, "bound": bound})
        log.info("%s %s value=%s bound=%s", "PASS" if passed else "FAIL", name, value, bound)

    N, s = g.dim, g.s
    check("critical_exponent", g.two_star == 2 * N / (N - 2 * s), g.two_star, 2 * N / (N - 2 * s))
    F = lemma_S_factor(P.alpha, P.beta)
    Fnum, targ = lemma_S_factor_minimum(P.alpha, P.beta)
    check("coupling_factor_closed_form", abs(F - Fnum) <= 1e-9 * F, F, Fnum)
    check("coupling_factor_at_most_two", F <= 2 + 1e-15, F, 2.0)
    for mu in cfg.section("constants")["mu"]:
        t_root = tau0_solve(mu, P)
        t_gold = _golden_min(_h_extended(mu, P), 0.5 * P.tau, 2.0 * P.tau)
        check(f"tau0_vs_golden_mu={mu:g}", abs(t_root - t_gold) < 1e-8, t_root, t_gold)
    check("tau0_small_mu_limit", abs(tau0_solve(1e-8, P) - P.tau) < 1e-4, tau0_solve(1e-8, P), P.tau)
    for mu in cfg.section("constants")["mu"]:
        hv, ident = h_tau(1.0, mu, P), 2 * (1 + mu) ** (-2 / g.two_star)
        check(f"h_at_one_mu={mu:g}", abs(hv - ident) <= 1e-12, hv, ident)
    n = cfg.section("verify")["splitting_samples"]
    for eps in (0.1, 0.01):
        q = rng.standard_normal((4, n)) * np.exp(rng.uniform(-3, 3, (4, n)))
        m = splitting_margin(*q, eps, P.alpha, P.beta, splitting_constant(eps, P.alpha, P.beta))
        check(f"splitting_inequality_eps={eps:g}", bool(np.all(m >= 0)), float(m.min()), 0.0)

    cal = calibrate_kappa(g)
    check("kappa_calibration_residual", cal.residual < 2e-2, cal.residual, 2e-2)

    prof = gaussian_bump(g, 0.3, 1.0)
    base = morrey_value(prof)
    worst = 0.0
    for r, y in ((2.0, 1.5), (0.5, -2.0)):
        moved = rescale_translate(prof, r, np.full(g.dim, y), check=False)
        worst = max(worst, abs(morrey_value(moved) / base - 1))
    check("morrey_dilation_invariance", worst < 1e-6, worst, 1e-6)

    st: dict = {}
    pair, Qab = _coupled_constant(cfg, stats=st)
    w0 = gaussian_bump(g, 0.0, cfg.section("quotient")["initial_width"])
    _, Qs = minimize_quotient(w0, "scalar", _solver_opts(cfg), ref_radius=_pinned_radius(cfg))
    check("coupling_ratio_vs_factor", abs(Qab / Qs / F - 1) < 2e-2, Qab / Qs, F)
    rmin, rmax = _ratio_stats(pair)
    check("component_ratio_constant", rmax - rmin < 1e-3, rmax - rmin, 1e-3)
    check("component_ratio_value", abs(0.5 * (rmin + rmax) - P.tau) < 1e-3, 0.5 * (rmin + rmax), P.tau)

    res = two_solutions_pipeline(cfg, sab=Qab)
    fr = res["free"]
    check("first_solution_negative_energy_in_omega1",
          fr["first_energy_negative"] and fr["first_region_always_omega1"], res["dependent"]["c0"], 0.0)
    check("mountain_pass_level_window", fr["eta_above_c0"] and fr["eta_below_bound"],
          res["dependent"]["eta"], [res["dependent"]["c0"], res["dependent"]["eta_upper_bound"]])
    check("solutions_distinct", fr["relative_distance"] > 1e-2, fr["relative_distance"], 1e-2)
    check("solutions_positive", fr["first_positive"] and fr["second_positive"])
    wr = max(fr["weak_residual_first"], fr["weak_residual_second"])
    check("weak_residual", wr < 1e-5, wr, 1e-5)

    B = critical_amplitude(P)
    lam = min(0.1, g.L / 8)
    one = ground_state_pair(B, BubbleParams(np.full(g.dim, 0.37), lam), P, g)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dec = profile_decompose(one, None, P)
    ok = dec.k == 1
    if ok:
        b = dec.bubbles[0]
        ok = (abs(b.scale / lam - 1) < 0.1 and np.linalg.norm(np.subtract(b.center, 0.37)) < g.h
              and abs(b.amplitudes[0] / b.amplitudes[1] - 1 / P.tau) < 1e-2)
    check("single_bubble_recovery", ok, dec.k, 1)
    check("single_bubble_ledger", dec.relative_defect < 1e-2, dec.relative_defect, 1e-2)

    size = cfg.section("verify")["corpus_size"]
    ratios, embeds = [], []
    for i in range(size):
        if i % 6 == 5:
            c = rng.uniform(-g.L / 8, g.L / 8, size=g.dim)
            p = ground_state_pair(B, BubbleParams(c, float(np.exp(rng.uniform(np.log(0.05), np.log(2))))), P, g)
        else:
            comps = []
            for _ in range(2):
                k = int(rng.integers(1, 4))
                comps.append(sum(rng.uniform(0.2, 2) * gaussian_bump(
                    g, rng.uniform(-g.L / 4, g.L / 4, size=g.dim), rng.uniform(0.3, 3.0)).values
                    for _ in range(k)))
            p = FieldPair.from_arrays(g, *comps)
        ratios.append(interpolation_ratio(p, 2.0 / g.two_star))
        embeds.append(embedding_ratio(p))
    ratios, embeds = np.array(ratios), np.array(embeds)
    check("interpolation_ratio_corpus", ratios.max() < 2 * np.median(ratios),
          float(ratios.max() / np.median(ratios)), 2.0)
    check("embedding_ratio_corpus", embeds.max() < 2 * np.median(embeds),
          float(embeds.max() / np.median(embeds)), 2.0)

    pairA = ground_state_pair(B, BubbleParams(np.zeros(g.dim), 1.0), P, g)
    base_c = coupling_integral(pairA, P)
    lam0 = g.L / 16
    defects = []
    for k in range(3):
        pb = ground_state_pair(B, BubbleParams(np.full(g.dim, g.L / 2), lam0 / 8**k), P, g)
        defects.append(brezis_lieb_defect(pairA, pb, P) / base_c)
    check("brezis_lieb_monotone", all(a > b for a, b in zip(defects, defects[1:])), defects, None)

    info = {
        "brezis_lieb_final_relative": defects[-1],
        "kappa": cal.kappa,
    }
    return checks, info


def cmd_verify(cfg: RunConfig) -> dict:
    """Run the invariant suite; raises :class:`InvariantFailure` if any gated check fails."""
    run = _Run("verify", cfg)
    checks, info = _checks(cfg)
    failed = [c["name"] for c in checks if not c["passed"]]
    free = {
        "checks": checks,
        "passed": len(checks) - len(failed),
        "failed": failed,
    }
    rep = run.report(free, {"informational": info}, "ok" if not failed else "failed")
    if failed:
        raise InvariantFailure(f"{len(failed)} invariant(s) failed: {', '.join(failed)}")
    return rep


COMMANDS = {
    "constants": cmd_constants,
    "ground_state": cmd_ground_state,
    "two_solutions": cmd_two_solutions,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracsys", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, default=None,
                    help="YAML configuration (default: the packaged default.yaml)")
    ap.add_argument("--out", type=Path, default=None,
                    help="output directory (env FRACSYS_OUT; default: output_dir from the config)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="FFT worker threads (env FRACSYS_THREADS; default 1)")
    ap.add_argument("--verbose", "-v", action="count", default=0)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, InvariantFailure):
        return EXIT_INVARIANT
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, (ConvergenceError, RegionEscapeError, PathCollapseError, ConcentrationWarning,
                        DegenerateDirectionError, BoxTooSmallError, NoBubbleError)):
        return EXIT_SOLVER
    return EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    out = args.out if args.out is not None else os.environ.get("FRACSYS_OUT")
    threads = args.threads
    if threads is None and os.environ.get("FRACSYS_THREADS"):
        try:
            threads = int(os.environ["FRACSYS_THREADS"])
        except ValueError:
            print("error: FRACSYS_THREADS must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=out)
        if threads is not None:
            set_workers(threads)
    except FracsysError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = COMMANDS[args.command](cfg)
    except FracsysError as exc:
        code = _exit_code(exc)
        marker = Path(cfg.output_dir) / f"{args.command}.FAILED"
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(f"exit {code}\n{type(exc).__name__}: {exc}\n")
        print(f"{args.command} failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code
    print(f"{args.command}: {rep['status']} -> {Path(cfg.output_dir) / (args.command + '.json')}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
