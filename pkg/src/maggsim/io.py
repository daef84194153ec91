"""File formats: JSON configuration, binary snapshots, CSV ledger, JSON reports.

The snapshot layout is fixed little-endian: magic "MAGG", version u32,
grid size u32, box length f64, time f64, field count u32, then per field a
u32-length-prefixed UTF-8 name and n*n f64 values in row-major order.
Snapshots store (phi, u_x, u_y, omega); mu and p are recomputed on load.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct

import numpy as np

from .errors import ConfigError, MagicMismatch, SnapshotError
from .model import ModelParams, State, make_state
from .simulation import InitialCondition, ModeSpec, OutputConfig, SimConfig
from .spectral import Field, VecField, make_grid

MAGIC = b"MAGG"
SNAPSHOT_VERSION = 1

LEDGER_COLUMNS = (
    "t",
    "E_total",
    "E_kin_u",
    "E_kin_omega",
    "E_grad",
    "E_pot",
    "D_total",
    "D_mu",
    "D_visc",
    "D_rot",
    "D_omega",
    "mass",
    "separation",
    "max_u",
    "div_residual",
    "energy_residual",
)


# ---------------------------------------------------------------- config


def _take(mapping, key, default=None, required=False, where=""):
    if required and key not in mapping:
        raise ConfigError(f"missing required key {key!r}{where}")
    return mapping.pop(key, default)


def _no_leftovers(mapping, where):
    if mapping:
        raise ConfigError(f"unknown key {next(iter(mapping))!r} in {where}")


def _parse_pair(value, name):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ConfigError(f"{name} must be a pair of numbers")
    return (float(value[0]), float(value[1]))


def _parse_modes(raw, name):
    modes = []
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError(f"{name} must be a list of [kx, ky, amplitude, phase]")
    for entry in raw:
        if not isinstance(entry, list) or len(entry) not in (3, 4):
            raise ConfigError(
                f"{name} entries must be [kx, ky, amplitude] or "
                "[kx, ky, amplitude, phase]"
            )
        kx, ky, amp = int(entry[0]), int(entry[1]), float(entry[2])
        phase = float(entry[3]) if len(entry) == 4 else 0.0
        modes.append(ModeSpec(kx=kx, ky=ky, amplitude=amp, phase=phase))
    return tuple(modes)


def config_from_dict(raw: dict) -> SimConfig:
    """Build and validate a SimConfig from parsed JSON; unknown keys error."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    data = dict(raw)

    grid_raw = _take(data, "grid", required=True)
    if not isinstance(grid_raw, dict):
        raise ConfigError("grid must be an object with n and box_length")
    grid_raw = dict(grid_raw)
    n = _take(grid_raw, "n", required=True, where=" in grid")
    box_length = _take(grid_raw, "box_length", required=True, where=" in grid")
    _no_leftovers(grid_raw, "grid")

    params_raw = _take(data, "params", required=True)
    if not isinstance(params_raw, dict):
        raise ConfigError("params must be an object")
    params_raw = dict(params_raw)
    kwargs = {}
    for key in ("sigma", "eps", "theta", "theta0", "alpha", "rho_bar"):
        if key in params_raw:
            kwargs[key] = float(_take(params_raw, key))
    for key in ("rho", "eta", "eta_r", "c0", "cd", "ca"):
        if key in params_raw:
            kwargs[key] = _parse_pair(_take(params_raw, key), key)
    if "potential" in params_raw:
        kwargs["potential"] = str(_take(params_raw, "potential"))
    if "variant" in params_raw:
        kwargs["variant"] = str(_take(params_raw, "variant"))
    if "stabilization" in params_raw:
        s = _take(params_raw, "stabilization")
        kwargs["stabilization"] = None if s is None else float(s)
    _no_leftovers(params_raw, "params")
    params = ModelParams(**kwargs)

    ic_raw = _take(data, "initial_condition", required=True)
    if not isinstance(ic_raw, dict):
        raise ConfigError("initial_condition must be an object")
    ic_raw = dict(ic_raw)
    kind = str(_take(ic_raw, "type", required=True, where=" in initial_condition"))
    ic_kwargs = {"kind": kind}
    if "phi_mean" in ic_raw:
        ic_kwargs["phi_mean"] = float(_take(ic_raw, "phi_mean"))
    for key in ("phi_modes", "psi_modes", "omega_modes"):
        if key in ic_raw:
            ic_kwargs[key] = _parse_modes(_take(ic_raw, key), key)
    if "noise_amplitude" in ic_raw:
        ic_kwargs["noise_amplitude"] = float(_take(ic_raw, "noise_amplitude"))
    if "noise_max_mode" in ic_raw:
        ic_kwargs["noise_max_mode"] = int(_take(ic_raw, "noise_max_mode"))
    if "width" in ic_raw:
        ic_kwargs["width"] = float(_take(ic_raw, "width"))
    if "path" in ic_raw:
        ic_kwargs["path"] = str(_take(ic_raw, "path"))
    _no_leftovers(ic_raw, "initial_condition")
    ic = InitialCondition(**ic_kwargs)

    out_raw = _take(data, "output", default={})
    if not isinstance(out_raw, dict):
        raise ConfigError("output must be an object")
    out_raw = dict(out_raw)
    output = OutputConfig(
        ledger_every=int(_take(out_raw, "ledger_every", default=1)),
        snapshot_every=int(_take(out_raw, "snapshot_every", default=0)),
    )
    _no_leftovers(out_raw, "output")

    config = SimConfig(
        n=int(n),
        box_length=float(box_length),
        params=params,
        dt=float(_take(data, "dt", required=True)),
        t_end=float(_take(data, "t_end", required=True)),
        cfl_number=float(_take(data, "cfl_number", default=0.4)),
        adaptive_dt=bool(_take(data, "adaptive_dt", default=True)),
        seed=int(_take(data, "seed", default=0)),
        output=output,
        initial_condition=ic,
    )
    _no_leftovers(data, "the configuration root")
    return config.validate()


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(config: SimConfig) -> dict:
    """Normalized dictionary form; load(dump(c)) == dump(load(dump(c)))."""
    p = config.params
    ic = config.initial_condition
    out = {
        "grid": {"n": config.n, "box_length": config.box_length},
        "params": {
            "sigma": p.sigma,
            "eps": p.eps,
            "rho": list(p.rho),
            "eta": list(p.eta),
            "eta_r": list(p.eta_r),
            "c0": list(p.c0),
            "cd": list(p.cd),
            "ca": list(p.ca),
            "theta": p.theta,
            "theta0": p.theta0,
            "potential": p.potential,
            "alpha": p.alpha,
            "variant": p.variant,
            "rho_bar": p.rho_bar,
            "stabilization": p.stabilization,
        },
        "dt": config.dt,
        "t_end": config.t_end,
        "cfl_number": config.cfl_number,
        "adaptive_dt": config.adaptive_dt,
        "seed": config.seed,
        "output": {
            "ledger_every": config.output.ledger_every,
            "snapshot_every": config.output.snapshot_every,
        },
        "initial_condition": {
            "type": ic.kind,
            "phi_mean": ic.phi_mean,
            "phi_modes": [[m.kx, m.ky, m.amplitude, m.phase] for m in ic.phi_modes],
            "psi_modes": [[m.kx, m.ky, m.amplitude, m.phase] for m in ic.psi_modes],
            "omega_modes": [
                [m.kx, m.ky, m.amplitude, m.phase] for m in ic.omega_modes
            ],
            "noise_amplitude": ic.noise_amplitude,
            "noise_max_mode": ic.noise_max_mode,
            "width": ic.width,
            "path": ic.path,
        },
    }
    return out


def save_config(config: SimConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_digest(config: SimConfig) -> str:
    """sha256 over the canonical JSON serialization."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -------------------------------------------------------------- snapshots

_SNAPSHOT_FIELDS = ("phi", "u_x", "u_y", "omega")


def write_snapshot(state: State, path):
    grid = state.grid
    n = grid.n
    arrays = {
        "phi": state.phi.values,
        "u_x": state.u.x.values,
        "u_y": state.u.y.values,
        "omega": state.omega.values,
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(struct.pack("<I", n))
        fh.write(struct.pack("<d", grid.box_length))
        fh.write(struct.pack("<d", state.time))
        fh.write(struct.pack("<I", len(_SNAPSHOT_FIELDS)))
        for name in _SNAPSHOT_FIELDS:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise SnapshotError(
            f"truncated snapshot: needed {count} bytes for {what}, got {len(data)}"
        )
    return data


def read_snapshot(path, params: ModelParams) -> State:
    """Load (phi, u, omega) and rebuild the derived mu; p starts at zero."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise MagicMismatch(
                f"expected magic {MAGIC!r}, found {magic!r} in {path}"
            )
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"unsupported snapshot version {version} (supported: "
                f"{SNAPSHOT_VERSION})"
            )
        (n,) = struct.unpack("<I", _read_exact(fh, 4, "grid size"))
        (box_length,) = struct.unpack("<d", _read_exact(fh, 8, "box length"))
        (time,) = struct.unpack("<d", _read_exact(fh, 8, "time"))
        (field_count,) = struct.unpack("<I", _read_exact(fh, 4, "field count"))
        fields = {}
        for _ in range(field_count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "field name length"))
            name = _read_exact(fh, name_len, "field name").decode("utf-8")
            payload = _read_exact(fh, 8 * n * n, f"field {name!r}")
            fields[name] = np.frombuffer(payload, dtype="<f8").reshape(n, n).copy()
        trailing = fh.read(1)
        if trailing:
            raise SnapshotError("snapshot has trailing bytes past the promised payload")
    missing = [f for f in _SNAPSHOT_FIELDS if f not in fields]
    if missing:
        raise SnapshotError(f"snapshot is missing fields {missing}")
    grid = make_grid(int(n), box_length)
    u = VecField(
        Field.from_values(grid, fields["u_x"]),
        Field.from_values(grid, fields["u_y"]),
    )
    return make_state(
        u, Field.from_values(grid, fields["omega"]),
        Field.from_values(grid, fields["phi"]), params, time=time,
    )


# ----------------------------------------------------------------- ledger


def write_ledger_csv(rows, path):
    """RFC-4180 CSV with 17 significant digits per value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEDGER_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    _fmt(row.t),
                    _fmt(row.e_total),
                    _fmt(row.e_kin_u),
                    _fmt(row.e_kin_omega),
                    _fmt(row.e_grad),
                    _fmt(row.e_pot),
                    _fmt(row.d_total),
                    _fmt(row.d_mu),
                    _fmt(row.d_visc),
                    _fmt(row.d_rot),
                    _fmt(row.d_omega),
                    _fmt(row.mass),
                    _fmt(row.separation),
                    _fmt(row.max_u),
                    _fmt(row.div_residual),
                    _fmt(row.energy_residual),
                ]
            )


def _fmt(x: float) -> str:
    return format(x, ".17g")


def read_ledger_csv(path):
    """Parse a ledger back into a list of dicts keyed by column name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, strict=True)
        header = next(reader)
        if tuple(header) != LEDGER_COLUMNS:
            raise ConfigError(f"unexpected ledger columns {header}")
        return [dict(zip(header, map(float, row))) for row in reader]


# ----------------------------------------------------------------- reports


def write_sweep_report(report, path):
    payload = {
        "parameter_values": list(report.parameter_values),
        "errors": list(report.errors),
        "fitted_slope": report.fitted_slope,
        "fit_r2": report.fit_r2,
        "config_digest": report.config_digest,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
