"""Run configuration, field snapshots, diagnostics CSV and image output.

Config files are plain sectioned key = value text (configparser syntax,
'#' comments).  Unknown sections or keys are errors: a typo must never
silently fall back to a default.  Snapshots are a single UTF-8 header line
followed by raw little-endian binary64 payloads, so write/read round trips
are bit-exact and restarts are deterministic.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from lcemul.diagnostics import DiagnosticsRow, DiagnosticsWriter, read_diagnostics
from lcemul.dynamics import NumParams
from lcemul.energy import AnchoringForm, PhysParams, Potential, State
from lcemul.grid import Grid2D, ScalarField, VectorField2

__all__ = [
    "ConfigError",
    "SnapshotFormatError",
    "RunConfig",
    "load_config",
    "builtin_config_path",
    "build_initial_state",
    "write_snapshot",
    "read_snapshot",
    "DiagnosticsRow",
    "DiagnosticsWriter",
    "read_diagnostics",
    "render_field_image",
    "PALETTES",
]

SNAPSHOT_MAGIC = "LCEMULSNAP"
SNAPSHOT_VERSION = 1


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


class SnapshotFormatError(ValueError):
    """Corrupt or truncated snapshot file."""


@dataclass
class InitialSpec:
    preset: str = "drop_benchmark"   # drop_benchmark | homogeneous | from_snapshot
    radius: float = 0.5
    width: float = 0.01
    d0x: float = 0.0
    d0y: float = 0.95
    phi0: float = 1.0
    path: str = ""


@dataclass
class OutputSpec:
    dir: str = "out"
    snapshot_every: int = 0
    image_fields: tuple = ()
    palette: str = "heat"


@dataclass
class FlowSpec:
    enabled: bool = False


@dataclass
class RunConfig:
    grid: Grid2D
    physics: PhysParams
    numerics: NumParams
    initial: InitialSpec
    output: OutputSpec
    flow: FlowSpec


# key -> (parser, destination attribute); sections absent from a file use
# dataclass defaults, but every key present must be known.
_GRID_KEYS = {"nx": int, "ny": int, "lx": float, "ly": float}
_PHYSICS_KEYS = {
    "eps": float, "alpha": float, "beta": float, "kappa": float,
    "gamma": float, "delta": float, "phi_cr": float,
    "theta_fh": float, "theta0_fh": float,
    "potential": str, "anchoring_form": str,
    "nu_star": float, "nu_star_upper": float,
}
_NUMERICS_KEYS = {
    "dt": float, "theta": float, "newton_tol": float, "newton_max_iters": int,
    "linsolve_tol": float, "energy_rate_tol": float, "max_steps": int,
    "snapshot_every": int, "jacobian": str,
}
_INITIAL_KEYS = {
    "preset": str, "radius": float, "width": float,
    "d0x": float, "d0y": float, "phi0": float, "path": str,
}
_OUTPUT_KEYS = {"dir": str, "snapshot_every": int, "image_fields": str, "palette": str}
_FLOW_KEYS = {"enabled": None}  # parsed as boolean

_SECTIONS = {
    "grid": _GRID_KEYS,
    "physics": _PHYSICS_KEYS,
    "numerics": _NUMERICS_KEYS,
    "initial": _INITIAL_KEYS,
    "output": _OUTPUT_KEYS,
    "flow": _FLOW_KEYS,
}

_REQUIRED_SECTIONS = ("grid", "physics", "numerics", "initial")


def _parse_bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got '{raw}'")


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, "r") as fh:
            cp.read_file(fh, source=str(path))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}")

    missing = [s for s in _REQUIRED_SECTIONS if s not in cp]
    if missing:
        raise ConfigError(f"missing required sections: {', '.join(missing)}")
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")

    def collect(section, keys):
        out = {}
        if section not in cp:
            return out
        for key, conv in keys.items():
            if key not in cp[section]:
                continue
            raw = cp[section][key]
            where = f"[{section}] {key}"
            if conv is None:
                out[key] = _parse_bool(raw, where)
            elif conv is str:
                out[key] = raw.strip()
            else:
                try:
                    out[key] = conv(raw)
                except ValueError:
                    raise ConfigError(f"{where}: cannot parse '{raw}' as {conv.__name__}")
        return out

    try:
        grid = Grid2D(**collect("grid", _GRID_KEYS))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[grid]: {err}")

    phys_kwargs = collect("physics", _PHYSICS_KEYS)
    if "potential" in phys_kwargs:
        try:
            phys_kwargs["potential"] = Potential(phys_kwargs["potential"])
        except ValueError:
            raise ConfigError(
                f"[physics] potential: expected one of "
                f"{[m.value for m in Potential]}, got '{phys_kwargs['potential']}'")
    if "anchoring_form" in phys_kwargs:
        try:
            phys_kwargs["anchoring_form"] = AnchoringForm(phys_kwargs["anchoring_form"])
        except ValueError:
            raise ConfigError(
                f"[physics] anchoring_form: expected one of "
                f"{[m.value for m in AnchoringForm]}, got '{phys_kwargs['anchoring_form']}'")
    try:
        physics = PhysParams(**phys_kwargs)
    except ValueError as err:
        raise ConfigError(f"[physics]: {err}")

    try:
        numerics = NumParams(**collect("numerics", _NUMERICS_KEYS))
    except ValueError as err:
        raise ConfigError(f"[numerics]: {err}")

    init_kwargs = collect("initial", _INITIAL_KEYS)
    initial = InitialSpec(**init_kwargs)
    if initial.preset not in ("drop_benchmark", "homogeneous", "from_snapshot"):
        raise ConfigError(f"[initial] preset: unknown preset '{initial.preset}'")
    if initial.preset == "from_snapshot":
        if not initial.path:
            raise ConfigError("[initial] path: required for preset from_snapshot")
        if not os.path.exists(initial.path):
            raise ConfigError(f"[initial] path: file does not exist: {initial.path}")

    out_kwargs = collect("output", _OUTPUT_KEYS)
    if "image_fields" in out_kwargs:
        raw = out_kwargs["image_fields"]
        fields_ = tuple(s.strip() for s in raw.split(",") if s.strip())
        for name in fields_:
            if name not in ("phi", "mu", "d", "u"):
                raise ConfigError(f"[output] image_fields: unknown field '{name}'")
        out_kwargs["image_fields"] = fields_
    output = OutputSpec(**out_kwargs)
    if output.snapshot_every < 0:
        raise ConfigError("[output] snapshot_every must be nonnegative")

    flow = FlowSpec(**collect("flow", _FLOW_KEYS))
    return RunConfig(grid=grid, physics=physics, numerics=numerics,
                     initial=initial, output=output, flow=flow)


def builtin_config_path(name: str) -> str:
    """Path of a preset configuration shipped with the package."""
    here = os.path.dirname(os.path.abspath(__file__))
    path = os.path.join(here, "presets", f"{name}.cfg")
    if not os.path.exists(path):
        raise ConfigError(f"no builtin config named '{name}'")
    return path


def build_initial_state(cfg: RunConfig) -> State:
    """Construct the initial state for a run configuration.

    The drop preset follows the benchmark initialization: mu and h start at
    zero (they are scheme unknowns, not derived fields, at step 0).  The
    homogeneous preset derives consistent mu/h instead, which keeps the
    theta-scheme second-order from the first step.
    """
    g = cfg.grid
    ini = cfg.initial
    if ini.preset == "drop_benchmark":
        X, Y = g.meshgrid()
        r = np.sqrt(X * X + Y * Y)
        phi = 1.0 - (0.5 - 0.5 * np.tanh((r - ini.radius) / ini.width))
        state = State(
            t=0.0,
            phi=ScalarField(g, phi),
            d=VectorField2.constant(g, ini.d0x, ini.d0y),
            mu=ScalarField.zeros(g),
            h=VectorField2.zeros(g),
        )
    elif ini.preset == "homogeneous":
        state = State(
            t=0.0,
            phi=ScalarField.full(g, ini.phi0),
            d=VectorField2.constant(g, ini.d0x, ini.d0y),
        )
    else:
        state = read_snapshot(ini.path)
        if state.grid != g:
            raise ConfigError(
                f"snapshot grid {state.grid.nx}x{state.grid.ny} does not match "
                f"config grid {g.nx}x{g.ny}")
    if cfg.flow.enabled and state.flow is None:
        from lcemul.flow import FlowState

        state = State(t=state.t, phi=state.phi, d=state.d, mu=state.mu, h=state.h,
                      flow=FlowState(u=VectorField2.zeros(g)))
    return state


# ---------------------------------------------------------------------------
# snapshots

def _snapshot_fields(state: State):
    fields = [("phi", [state.phi.values])]
    fields.append(("d", [state.d.x, state.d.y]))
    if state.mu is not None:
        fields.append(("mu", [state.mu.values]))
    if state.h is not None:
        fields.append(("h", [state.h.x, state.h.y]))
    if state.flow is not None:
        fields.append(("u", [state.flow.u.x, state.flow.u.y]))
        if state.flow.p_star is not None:
            fields.append(("p_star", [state.flow.p_star.values]))
    return fields


def write_snapshot(state: State, path) -> None:
    """One UTF-8 header line, then row-major float64 little-endian payloads."""
    g = state.grid
    fields = _snapshot_fields(state)
    desc = ",".join(f"{name}:{len(comps)}" for name, comps in fields)
    header = (f"{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION} nx={g.nx} ny={g.ny} "
              f"lx={g.lx!r} ly={g.ly!r} t={state.t!r} fields={desc}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        for _name, comps in fields:
            for arr in comps:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path) -> State:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8", errors="replace").strip()
        tokens = header.split()
        if len(tokens) < 3 or tokens[0] != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"not a snapshot file: {path}")
        if tokens[1] != f"v{SNAPSHOT_VERSION}":
            raise SnapshotFormatError(f"unsupported snapshot version {tokens[1]}")
        kv = {}
        for tok in tokens[2:]:
            if "=" not in tok:
                raise SnapshotFormatError(f"malformed header token '{tok}'")
            key, val = tok.split("=", 1)
            kv[key] = val
        try:
            nx, ny = int(kv["nx"]), int(kv["ny"])
            lx, ly = float(kv["lx"]), float(kv["ly"])
            t = float(kv["t"])
            desc = kv["fields"]
        except (KeyError, ValueError) as err:
            raise SnapshotFormatError(f"malformed snapshot header: {err}")
        grid = Grid2D(nx, ny, lx, ly)
        payload = fh.read()

    fields = []
    for item in desc.split(","):
        name, _, comps = item.partition(":")
        try:
            fields.append((name, int(comps)))
        except ValueError:
            raise SnapshotFormatError(f"malformed field descriptor '{item}'")
    n_expected = sum(c for _n, c in fields) * nx * ny * 8
    if len(payload) != n_expected:
        raise SnapshotFormatError(
            f"payload length {len(payload)} != expected {n_expected}")

    data = {}
    offset = 0
    count = nx * ny * 8
    for name, comps in fields:
        arrays = []
        for _ in range(comps):
            arr = np.frombuffer(payload[offset:offset + count], dtype="<f8").reshape(ny, nx)
            arrays.append(arr.copy())
            offset += count
        data[name] = arrays

    if "phi" not in data or "d" not in data:
        raise SnapshotFormatError("snapshot is missing phi or d")
    flow = None
    if "u" in data:
        from lcemul.flow import FlowState

        p_star = ScalarField(grid, data["p_star"][0]) if "p_star" in data else None
        flow = FlowState(u=VectorField2(grid, *data["u"]), p_star=p_star)
    return State(
        t=t,
        phi=ScalarField(grid, data["phi"][0]),
        d=VectorField2(grid, *data["d"]),
        mu=ScalarField(grid, data["mu"][0]) if "mu" in data else None,
        h=VectorField2(grid, *data["h"]) if "h" in data else None,
        flow=flow,
    )


# ---------------------------------------------------------------------------
# images

# anchor colors, linearly interpolated over the normalized value range
PALETTES = {
    "gray": [(0, 0, 0), (255, 255, 255)],
    "heat": [(0, 0, 0), (128, 0, 38), (227, 26, 28), (253, 141, 60), (255, 237, 160)],
    "coolwarm": [(59, 76, 192), (221, 221, 221), (180, 4, 38)],
}


def _palette_lut(name: str) -> np.ndarray:
    if name not in PALETTES:
        raise ValueError(f"unknown palette '{name}' (have {sorted(PALETTES)})")
    anchors = np.asarray(PALETTES[name], dtype=np.float64)
    xs = np.linspace(0.0, 1.0, len(anchors))
    grid_ = np.linspace(0.0, 1.0, 256)
    lut = np.stack([np.interp(grid_, xs, anchors[:, c]) for c in range(3)], axis=1)
    return np.clip(np.rint(lut), 0, 255).astype(np.uint8)


def render_field_image(field: ScalarField, path, palette: str = "heat") -> None:
    """Binary P6 PPM with linear min-max normalization; deterministic bytes."""
    vals = field.values
    vmin = float(vals.min())
    vmax = float(vals.max())
    if vmax > vmin:
        norm = (vals - vmin) / (vmax - vmin)
    else:
        norm = np.zeros_like(vals)
    lut = _palette_lut(palette)
    idx = np.clip((norm * 255.0).astype(np.int64), 0, 255)
    rgb = lut[idx]
    ny, nx = vals.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
