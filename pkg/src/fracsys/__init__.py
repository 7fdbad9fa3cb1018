"""Spectral toolkit for the critical fractional system

    (-Delta)^s u = (alpha/2*) |u|^(alpha-2) u |v|^beta + f,
    (-Delta)^s v = (beta/2*)  |u|^alpha |v|^(beta-2) v + g,

posed on a periodic box that stands in for R^N.
"""

from .grid import (
    Field,
    FieldPair,
    ForcingPair,
    GridSpec,
    SystemParams,
    coupling_integral,
    dual_norm,
    frac_laplacian,
    gaussian_bump,
    hs_inner,
    integral_power,
    load_field,
    pair_inner,
    pair_norm,
    riesz_representative,
    save_field,
    set_workers,
)

from .bubbles import BubbleParams, GroundStatePair, calibrate_kappa, critical_amplitude, ground_state_pair, talenti_bubble
from .config import load_config
from .decomposition import DecomposeOpts, profile_decompose
from .errors import FracsysError
from .functionals import energy_J, lemma_S_factor, rayleigh_S, rayleigh_Sab, tau0_solve
from .morrey import morrey_scan
from .solvers import SolverOpts, find_first_solution, minimize_quotient, mountain_pass

__version__ = "0.1.0"

__all__ = [
    "Field", "FieldPair", "ForcingPair", "GridSpec", "SystemParams",
    "coupling_integral", "dual_norm", "frac_laplacian", "gaussian_bump", "hs_inner",
    "integral_power", "load_field", "pair_inner", "pair_norm", "riesz_representative",
    "save_field", "set_workers",
    "BubbleParams", "GroundStatePair", "calibrate_kappa", "critical_amplitude",
    "ground_state_pair", "talenti_bubble",
    "load_config",
    "DecomposeOpts", "profile_decompose",
    "FracsysError",
    "energy_J", "lemma_S_factor", "rayleigh_S", "rayleigh_Sab", "tau0_solve",
    "morrey_scan",
    "SolverOpts", "find_first_solution", "minimize_quotient", "mountain_pass",
    "__version__",
]
