"""Run configuration: a versioned YAML schema with line-precise validation.

Every key is declared in :data:`SCHEMA`; unknown keys are errors.  Values
are checked for type while the YAML node marks are still available, so a
message points at the offending line, and then re-validated by constructing
the library objects (:class:`GridSpec`, :class:`SystemParams`, ...).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, FracsysError
from .functionals import admissibility_threshold
from .grid import Field, ForcingPair, GridSpec, SystemParams, dual_norm, gaussian_bump

__all__ = ["SCHEMA_VERSION", "SCHEMA", "RunConfig", "load_config", "default_config_path",
           "build_forcing"]

SCHEMA_VERSION = 1

# Leaf: (kind, default).  Kinds: int, float, bool, str, floats (list), point,
# "float?" (number or null), bumps (list of bump mappings).
_BUMP = {
    "center": ("point", None),
    "width": ("float", 1.0),
    "amplitude": ("float", 1.0),
}
_SYNTH = {
    "center": ("point", None),
    "scale": ("float", None),
    "amplitude": ("float", 1.0),
}

SCHEMA = {
    "schema_version": ("int", None),
    "seed": ("int", 0),
    "output_dir": ("str", "fracsys-out"),
    "grid": {
        "dim": ("int", 1),
        "points_per_axis": ("int", 4096),
        "box_half_width": ("float", 40.0),
        "s": ("float", 0.3),
        "zero_mode": ("str", "cell"),
    },
    "params": {
        "alpha": ("float", 2.0),
        "beta": ("float?", None),
    },
    "forcing": {
        "threshold_fraction": ("float?", 0.5),
        "f": ("bumps", [{"center": [0.0], "width": 2.0, "amplitude": 1.0}]),
        "g": ("bumps", [{"center": [1.0], "width": 2.0, "amplitude": 1.0}]),
    },
    "solver": {
        "max_iters": ("int", 5000),
        "step_size": ("float", 0.5),
        "grad_tol": ("float", 1e-8),
        "recenter_every": ("int", 100),
    },
    "quotient": {
        "ref_scale": ("float", 1.0),
        "initial_width": ("float", 1.0),
        "restarts": ("int", 1),
    },
    "constants": {
        "mu": ("floats", [1e-6, 1e-4, 1e-2]),
        "h_curve_mu": ("float", 1e-2),
        "h_curve_tau_max": ("float", 3.0),
        "h_curve_points": ("int", 200),
    },
    "two_solutions": {
        "template_scale": ("float", 2.0),
        "nodes": ("int", 33),
        "dt": ("float", 0.1),
        "max_node_step": ("float", 0.05),
        "max_iters": ("int", 3000),
        "grad_tol": ("float", 1e-8),
        "first_grad_tol": ("float", 1e-9),
        "weak_tests": ("int", 20),
    },
    "decompose": {
        "bubbles": ("synth", [{"center": [-10.0], "scale": 0.8, "amplitude": 1.0},
                              {"center": [10.0], "scale": 0.1, "amplitude": 1.0}]),
        "input_u": ("str?", None),
        "input_v": ("str?", None),
        "include_limit": ("bool", False),
        "max_bubbles": ("int", 4),
        "fit_threshold": ("float", 0.95),
        "defect_tol": ("float", 1e-2),
        "rel_tol": ("float", 1e-2),
    },
    "verify": {
        "splitting_samples": ("int", 10000),
        "corpus_size": ("int", 24),
    },
}


def default_config_path() -> Path:
    """Path of the configuration shipped with the package."""
    return Path(str(resources.files("fracsys") / "configs" / "default.yaml"))


def _where(source: str, node) -> str:
    if node is None:
        return source
    m = node.start_mark
    return f"{source}:{m.line + 1}:{m.column + 1}"


def _mapping_items(node):
    return {k.value: (k, v) for k, v in node.value}


def _check_leaf(kind, value, node, path, source):
    def fail(expect):
        raise ConfigError(f"{_where(source, node)}: {path}: expected {expect}, got {value!r}")

    def number(x):
        return isinstance(x, (int, float)) and not isinstance(x, bool)

    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            fail("an integer")
    elif kind == "float":
        if not number(value):
            fail("a number")
        value = float(value)
    elif kind == "float?":
        if value is not None:
            if not number(value):
                fail("a number or null")
            value = float(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            fail("true or false")
    elif kind == "str":
        if not isinstance(value, str):
            fail("a string")
    elif kind == "str?":
        if value is not None and not isinstance(value, str):
            fail("a string or null")
    elif kind == "floats":
        if not isinstance(value, list) or not all(number(x) for x in value):
            fail("a list of numbers")
        value = [float(x) for x in value]
    elif kind == "point":
        if number(value):
            value = [float(value)]
        elif isinstance(value, list) and value and all(number(x) for x in value):
            value = [float(x) for x in value]
        else:
            fail("a number or a list of numbers")
    return value


def _check_items(schema, value, node, path, source):
    if not isinstance(value, list):
        raise ConfigError(f"{_where(source, node)}: {path}: expected a list of mappings")
    out = []
    for i, item in enumerate(value):
        inode = node.value[i] if node is not None else None
        out.append(_check_section(schema, item, inode, f"{path}[{i}]", source))
    return out


def _check_section(schema, value, node, path, source):
    if not isinstance(value, dict):
        raise ConfigError(f"{_where(source, node)}: {path or 'document'}: expected a mapping")
    items = _mapping_items(node) if node is not None else {}
    for key in value:
        if key not in schema:
            knode = items.get(key, (None, None))[0]
            allowed = ", ".join(sorted(schema))
            raise ConfigError(
                f"{_where(source, knode)}: unknown key {key!r} in {path or 'document'} "
                f"(allowed: {allowed})"
            )
    out = {}
    for key, spec in schema.items():
        sub = f"{path}.{key}" if path else key
        vnode = items.get(key, (None, None))[1]
        if isinstance(spec, dict):
            out[key] = _check_section(spec, value.get(key, {}), vnode, sub, source)
            continue
        kind, default = spec
        if key not in value:
            if default is None and kind not in ("float?", "str?"):
                raise ConfigError(f"{_where(source, node)}: missing required key {sub!r}")
            out[key] = copy.deepcopy(default)
            continue
        if kind == "bumps":
            out[key] = _check_items(_BUMP, value[key], vnode, sub, source)
        elif kind == "synth":
            out[key] = _check_items(_SYNTH, value[key], vnode, sub, source)
        else:
            out[key] = _check_leaf(kind, value[key], vnode, sub, source)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with the library objects it describes."""

    data: dict
    grid: GridSpec
    params: SystemParams
    source: str

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    def section(self, name: str) -> dict:
        return self.data[name]

    def with_overrides(self, *, seed=None, output_dir=None) -> "RunConfig":
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["seed"] = int(seed)
        if output_dir is not None:
            data["output_dir"] = str(output_dir)
        return RunConfig(data, self.grid, self.params, self.source)

    def echo(self) -> dict:
        """The resolved configuration, for embedding in reports."""
        return copy.deepcopy(self.data)


def _build(data: dict, source: str, node) -> RunConfig:
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"{source}: schema_version {data['schema_version']} is not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    items = _mapping_items(node) if node is not None else {}

    def at(key):
        return _where(source, items.get(key, (None, None))[1])

    try:
        grid = GridSpec(**data["grid"])
    except FracsysError as exc:
        raise ConfigError(f"{at('grid')}: grid: {exc}") from exc
    p = data["params"]
    try:
        if p["beta"] is None:
            params = SystemParams.for_grid(grid, p["alpha"])
            p["beta"] = params.beta
        else:
            params = SystemParams(p["alpha"], p["beta"], grid.two_star)
    except FracsysError as exc:
        raise ConfigError(f"{at('params')}: params: {exc}") from exc
    for name in ("f", "g"):
        for i, bump in enumerate(data["forcing"][name]):
            if len(bump["center"]) not in (1, grid.dim):
                raise ConfigError(f"{at('forcing')}: forcing.{name}[{i}].center has the wrong length")
            if not bump["width"] > 0 or bump["amplitude"] < 0:
                raise ConfigError(f"{at('forcing')}: forcing.{name}[{i}] needs width > 0 and amplitude >= 0")
    tf = data["forcing"]["threshold_fraction"]
    if tf is not None and not 0 <= tf:
        raise ConfigError(f"{at('forcing')}: forcing.threshold_fraction must be nonnegative")
    for i, b in enumerate(data["decompose"]["bubbles"]):
        if not b["scale"] > 0:
            raise ConfigError(f"{at('decompose')}: decompose.bubbles[{i}].scale must be positive")
    if (data["decompose"]["input_u"] is None) != (data["decompose"]["input_v"] is None):
        raise ConfigError(f"{at('decompose')}: decompose.input_u and input_v must be given together")
    s = data["solver"]
    if s["recenter_every"] < 1 or not s["grad_tol"] > 0 or not s["step_size"] > 0:
        raise ConfigError(f"{at('solver')}: solver needs recenter_every >= 1, grad_tol > 0, step_size > 0")
    return RunConfig(data, grid, params, source)


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Read and validate a configuration file (the shipped default if ``path`` is None)."""
    if text is None:
        path = default_config_path() if path is None else Path(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        source = str(path)
    else:
        source = "<string>" if path is None else str(path)
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else None
        finally:
            loader.dispose()
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    if data is None:
        raise ConfigError(f"{source}: empty configuration")
    checked = _check_section(SCHEMA, data, node, "", source)
    return _build(checked, source, node)


def build_forcing(cfg: RunConfig, sab_estimate: float | None = None) -> ForcingPair:
    """Gaussian-bump forcing from the config.

    With ``threshold_fraction`` set, each component is rescaled so that its
    dual norm equals that fraction of the admissibility threshold (which
    needs ``sab_estimate``); otherwise amplitudes are used as given.
    """
    g = cfg.grid
    spec = cfg.section("forcing")
    comps = []
    for name in ("f", "g"):
        vals = np.zeros(g.shape)
        for b in spec[name]:
            vals = vals + gaussian_bump(g, b["center"], b["width"], b["amplitude"]).values
        comps.append(vals)
    frac = spec["threshold_fraction"]
    if frac is not None:
        if sab_estimate is None:
            raise ConfigError("threshold_fraction needs an estimate of the coupled constant")
        thr = admissibility_threshold(g, sab_estimate)
        for i, vals in enumerate(comps):
            dn = dual_norm(Field(g, vals))
            if dn > 0:
                comps[i] = vals * (frac * thr / dn)
    try:
        return ForcingPair(Field(g, comps[0]), Field(g, comps[1]))
    except FracsysError as exc:
        raise ConfigError(f"{cfg.source}: forcing: {exc}") from exc
