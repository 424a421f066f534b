"""Command-line entry points, configuration parsing and serialization.

Subcommands: `run` simulates and writes diagnostics, `verify` additionally
runs every verification check, `psw` samples the Poincare-type inequalities
standalone, and `sweep` runs a grid of configurations.

Configuration documents are YAML key-value files.  Keys and defaults:

  n               node count (required, >= 16)
  t_end           time horizon (required, > 0)
  init            cosine-graph | flat | custom-file (required)
  A               cosine amplitude (default 0.05; must stay below half the gap)
  m               cosine mode, integer >= 1 (default 1)
  dt_safety       step factor in (0, 1] (default 0.1)
  snapshot_every  steps between snapshots (default 100)
  line_left       left boundary line abscissa (default -1.0)
  line_right      right boundary line abscissa (default 1.0)
  stop_knorm      terminate when sup|k| drops below this (default 0, disabled)
  max_steps       step cap (default 10000000)
  path            source file for custom-file initial data
  frame           frame index into a custom file (default -1, the last)

Unknown keys are rejected so misspellings cannot silently fall back to
defaults.  All defaults are echoed into the run metadata.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np
import yaml

from .curve import DiscreteCurve, compute_geometry, integrate, resample_uniform
from .diagnostics import C0_PI3, Trajectory, small_energy_margin
from .flow import FlowConfig, run_flow
from .verify import (
    CheckReport,
    check_boundary_hierarchy,
    check_dissipation,
    check_k2_identity,
    check_kss_inequality,
    check_length_identity,
    check_psw,
    psw_sample_study,
)

SCHEMA_VERSION = 1
DENSE_SAMPLES = 8192

CSV_COLUMNS = (
    "time", "omega", "length", "energy", "knorm2", "ksnorm2", "kssnorm2",
    "k_inf", "ks_inf", "delta_margin", "dissipation",
    "bc_ks_left", "bc_ks_right", "bc_ksss_left", "bc_ksss_right",
)


class ConfigError(ValueError):
    """A configuration document is malformed or violates a constraint."""


@dataclass(frozen=True)
class InitialSpec:
    """Recipe for the initial curve."""

    kind: str
    amplitude: float = 0.05
    mode: int = 1
    n: int = 128
    line_left: float = -1.0
    line_right: float = 1.0
    path: str | None = None
    frame: int = -1

    def __post_init__(self):
        if self.kind not in ("cosine-graph", "flat", "custom-file"):
            raise ValueError(f"unknown initial kind {self.kind!r}")
        if self.n < 16:
            raise ValueError(f"n must be >= 16, got {self.n}")
        if not self.line_right > self.line_left:
            raise ValueError("line_right must exceed line_left")
        if self.kind == "cosine-graph":
            half_gap = 0.5 * (self.line_right - self.line_left)
            if not 0.0 <= self.amplitude < half_gap:
                raise ValueError(
                    f"A must satisfy 0 <= A < {half_gap} (half the line gap), "
                    f"got {self.amplitude}"
                )
            if self.mode < 1:
                raise ValueError(f"m must be a positive integer, got {self.mode}")
        if self.kind == "custom-file" and not self.path:
            raise ValueError("custom-file initial data needs a 'path' key")


def _load_custom_points(spec: InitialSpec) -> np.ndarray:
    with open(spec.path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "frames" in data:
        frames = data["frames"]
        if not frames:
            raise ConfigError(f"{spec.path}: no frames to ingest")
        try:
            points = frames[spec.frame]["points"]
        except IndexError:
            raise ConfigError(
                f"{spec.path}: frame {spec.frame} out of range ({len(frames)} frames)"
            ) from None
    elif isinstance(data, dict) and "points" in data:
        points = data["points"]
    else:
        raise ConfigError(f"{spec.path}: expected a 'points' or 'frames' entry")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError(f"{spec.path}: points must be an (n+1) x 2 table")
    gap = spec.line_right - spec.line_left
    if (abs(pts[0, 0] - spec.line_left) > 1e-9 * gap
            or abs(pts[-1, 0] - spec.line_right) > 1e-9 * gap):
        raise ConfigError(
            f"{spec.path}: endpoint abscissae {pts[0, 0]}, {pts[-1, 0]} do not "
            f"match the configured lines {spec.line_left}, {spec.line_right}"
        )
    pts[0, 0] = spec.line_left
    pts[-1, 0] = spec.line_right
    return pts


def generate_initial(spec: InitialSpec) -> DiscreteCurve:
    """Build the initial curve for a run.

    The cosine graph y = A cos(m*pi*(u+1)/2) (u the abscissa mapped affinely
    to [-1, 1]) meets both lines perpendicularly with every odd derivative of
    y vanishing at the ends, so the contact conditions hold exactly in the
    continuum; it is sampled densely and resampled to n+1 uniform nodes.
    A nonpositive small-energy margin triggers a warning, not an error: the
    run proceeds, only the decay guarantees are off.
    """
    if spec.kind == "flat":
        x = np.linspace(spec.line_left, spec.line_right, spec.n + 1)
        curve = DiscreteCurve(np.column_stack([x, np.zeros_like(x)]),
                              spec.line_left, spec.line_right)
    elif spec.kind == "cosine-graph":
        x = np.linspace(spec.line_left, spec.line_right, DENSE_SAMPLES + 1)
        u = (2.0 * x - (spec.line_left + spec.line_right)) / (spec.line_right - spec.line_left)
        y = spec.amplitude * np.cos(0.5 * spec.mode * math.pi * (u + 1.0))
        dense = DiscreteCurve(np.column_stack([x, y]), spec.line_left, spec.line_right)
        curve = resample_uniform(dense, spec.n)
    else:
        pts = _load_custom_points(spec)
        curve = DiscreteCurve(pts, spec.line_left, spec.line_right)
        if curve.n != spec.n:
            curve = resample_uniform(curve, spec.n)
    profile = compute_geometry(curve)
    margin = small_energy_margin(integrate(profile.k_s ** 2, profile), profile.length)
    if margin <= 0.0:
        warnings.warn(
            f"small-energy margin is not positive (delta = {margin:.6g}); "
            "length decrease and exponential decay are not guaranteed",
            RuntimeWarning,
            stacklevel=2,
        )
    return curve


_CONFIG_DEFAULTS = {
    "A": 0.05,
    "m": 1,
    "dt_safety": 0.1,
    "snapshot_every": 100,
    "line_left": -1.0,
    "line_right": 1.0,
    "stop_knorm": 0.0,
    "max_steps": 10_000_000,
    "path": None,
    "frame": -1,
}
_REQUIRED_KEYS = ("n", "t_end", "init")
_INT_KEYS = ("n", "m", "snapshot_every", "max_steps", "frame")
_FLOAT_KEYS = ("t_end", "A", "dt_safety", "line_left", "line_right", "stop_knorm")


def _coerce_int(key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}")
    return int(value)


def _coerce_float(key: str, value) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}")
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None
    if not isinstance(value, (int, float)):
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}")
    return float(value)


def parse_config(text: str) -> tuple[FlowConfig, InitialSpec, dict]:
    """Parse a YAML configuration document into validated run parameters.

    Returns the flow configuration, the initial-curve recipe, and the full
    echo of every key with defaults filled in (recorded into run metadata).
    Unknown keys, type mismatches and constraint violations raise
    ConfigError naming the key.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a key-value document, got {type(doc).__name__}")
    return _config_from_dict(doc)


def _config_from_dict(doc: dict) -> tuple[FlowConfig, InitialSpec, dict]:
    known = set(_REQUIRED_KEYS) | set(_CONFIG_DEFAULTS)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError("unknown key" + ("s" if len(unknown) > 1 else "")
                          + " " + ", ".join(repr(k) for k in unknown))

    echo: dict = dict(_CONFIG_DEFAULTS)
    echo.update(doc)
    for key in _INT_KEYS:
        if key in echo and echo[key] is not None:
            echo[key] = _coerce_int(key, echo[key])
    for key in _FLOAT_KEYS:
        if key in echo and echo[key] is not None:
            echo[key] = _coerce_float(key, echo[key])

    # constraints on provided keys are reported before missing required keys,
    # so a document containing only a bad value gets the more useful error
    if "n" in echo and echo["n"] < 16:
        raise ConfigError(f"key 'n': must be >= 16, got {echo['n']}")
    if "t_end" in echo and echo["t_end"] <= 0.0:
        raise ConfigError(f"key 't_end': must be positive, got {echo['t_end']}")
    if "init" in echo and echo["init"] not in ("cosine-graph", "flat", "custom-file"):
        raise ConfigError(f"key 'init': must be cosine-graph, flat or custom-file, "
                          f"got {echo['init']!r}")
    if not 0.0 < echo["dt_safety"] <= 1.0:
        raise ConfigError(f"key 'dt_safety': must be in (0, 1], got {echo['dt_safety']}")
    if echo["snapshot_every"] < 1:
        raise ConfigError(f"key 'snapshot_every': must be >= 1, got {echo['snapshot_every']}")
    if not echo["line_right"] > echo["line_left"]:
        raise ConfigError("key 'line_right': must exceed line_left")
    if echo["stop_knorm"] < 0.0:
        raise ConfigError(f"key 'stop_knorm': must be >= 0, got {echo['stop_knorm']}")
    if echo["max_steps"] < 1:
        raise ConfigError(f"key 'max_steps': must be >= 1, got {echo['max_steps']}")

    missing = [k for k in _REQUIRED_KEYS if k not in doc]
    if missing:
        raise ConfigError("missing required key" + ("s" if len(missing) > 1 else "")
                          + " " + ", ".join(repr(k) for k in missing))

    if echo["init"] != "custom-file":
        echo["path"] = None
    try:
        spec = InitialSpec(
            kind=echo["init"],
            amplitude=echo["A"],
            mode=echo["m"],
            n=echo["n"],
            line_left=echo["line_left"],
            line_right=echo["line_right"],
            path=echo["path"],
            frame=echo["frame"],
        )
        config = FlowConfig(
            n=echo["n"],
            t_end=echo["t_end"],
            dt_safety=echo["dt_safety"],
            snapshot_every=echo["snapshot_every"],
            line_left=echo["line_left"],
            line_right=echo["line_right"],
            stop_knorm=echo["stop_knorm"],
            max_steps=echo["max_steps"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config, spec, echo


def sweep_cells(doc: dict) -> list[tuple[str, dict]]:
    """Expand list-valued A, m, n keys into one configuration per grid cell."""
    if not isinstance(doc, dict):
        raise ConfigError("sweep configuration must be a key-value document")
    grids = {}
    for key in ("A", "m", "n"):
        value = doc.get(key)
        grids[key] = list(value) if isinstance(value, list) else [value]
    cells = []
    for a, m, n in product(grids["A"], grids["m"], grids["n"]):
        cell = dict(doc)
        for key, value in (("A", a), ("m", m), ("n", n)):
            if value is None:
                cell.pop(key, None)
            else:
                cell[key] = value
        # label unswept dimensions by their effective default
        label_a = a if a is not None else _CONFIG_DEFAULTS["A"]
        label_m = m if m is not None else _CONFIG_DEFAULTS["m"]
        name = f"A{label_a}_m{label_m}_n{n}"
        cells.append((name, cell))
    return cells


def _format_number(value: float) -> str:
    return repr(float(value))


def emit(trajectory: Trajectory, reports: list[CheckReport] | None, out_dir) -> list[Path]:
    """Write diagnostics.csv, snapshots.json and (given reports) verify.json.

    Numbers are serialized in full round-trip precision and every mapping is
    key-sorted, so identical inputs produce byte-identical files.  The
    wall-time field of the run metadata is deliberately excluded.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "diagnostics.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for snap in trajectory.snapshots:
            rec = snap.record
            bc = rec.bc_residuals
            row = [
                rec.time, rec.omega, rec.length, rec.energy, rec.knorm2,
                rec.ksnorm2, rec.kssnorm2, rec.k_inf, rec.ks_inf,
                rec.delta_margin, rec.dissipation,
                bc.get("ks_left", 0.0), bc.get("ks_right", 0.0),
                bc.get("ksss_left", 0.0), bc.get("ksss_right", 0.0),
            ]
            fh.write(",".join(_format_number(v) for v in row) + "\n")
    written.append(csv_path)

    meta = {k: v for k, v in trajectory.metadata.items() if k != "wall_time"}
    meta["schema_version"] = SCHEMA_VERSION
    frames = [
        {"t": snap.time, "points": [[float(x), float(y)] for x, y in snap.curve.points]}
        for snap in trajectory.snapshots
    ]
    json_path = out / "snapshots.json"
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"meta": meta, "frames": frames}, fh,
                  sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    written.append(json_path)

    if reports is not None:
        verify_path = out / "verify.json"
        with open(verify_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(
                {"schema_version": SCHEMA_VERSION,
                 "reports": [asdict(report) for report in reports]},
                fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        written.append(verify_path)
    return written


def _margin_summary(curve: DiscreteCurve) -> str:
    profile = compute_geometry(curve)
    product = integrate(profile.k_s ** 2, profile) * profile.length ** 3
    margin = C0_PI3 - product
    return (f"small-energy margin delta = {margin:.6g} "
            f"(|k_s|^2 L0^3 = {product:.6g}, threshold = {C0_PI3:.6g})")


def _run_one(echo: dict, config: FlowConfig, spec: InitialSpec,
             out_dir, quiet: bool, reports: list[CheckReport] | None = None) -> Trajectory:
    initial = generate_initial(spec)
    if not quiet:
        print(_margin_summary(initial))
    trajectory = run_flow(config, initial, extra_metadata={"config": echo})
    emit(trajectory, reports, out_dir)
    if not quiet:
        meta = trajectory.metadata
        final = trajectory.snapshots[-1].record
        print(f"run finished: termination={meta['termination']} steps={meta['steps']} "
              f"t={meta['final_time']:.6g} snapshots={len(trajectory.snapshots)}")
        print(f"final: L={final.length:.9g} energy={final.energy:.6g} "
              f"k_inf={final.k_inf:.6g} omega={final.omega:.3g}")
    return trajectory


def _print_reports(reports: list[CheckReport], quiet: bool) -> bool:
    all_passed = all(report.passed for report in reports)
    if not quiet:
        for report in reports:
            flag = "PASS" if report.passed else "FAIL"
            print(f"{flag} {report.name}: residual {report.residual:.3g} "
                  f"(tolerance {report.tolerance:.3g})")
    return all_passed


def _cmd_run(args) -> int:
    config, spec, echo = parse_config(Path(args.config).read_text(encoding="utf-8"))
    if args.snapshot_every is not None:
        config = replace(config, snapshot_every=args.snapshot_every)
        echo = {**echo, "snapshot_every": args.snapshot_every}
    trajectory = _run_one(echo, config, spec, args.out, args.quiet)
    return 0 if trajectory.metadata["termination"] != "dt_underflow" else 1


def _cmd_verify(args) -> int:
    config, spec, echo = parse_config(Path(args.config).read_text(encoding="utf-8"))
    if args.snapshot_every is not None:
        config = replace(config, snapshot_every=args.snapshot_every)
        echo = {**echo, "snapshot_every": args.snapshot_every}
    initial = generate_initial(spec)
    if not args.quiet:
        print(_margin_summary(initial))
    trajectory = run_flow(config, initial, extra_metadata={"config": echo})
    reports = [
        check_dissipation(trajectory),
        check_length_identity(trajectory),
        check_k2_identity(trajectory),
        check_kss_inequality(trajectory),
        check_boundary_hierarchy(compute_geometry(trajectory.snapshots[0].curve)),
        check_boundary_hierarchy(compute_geometry(trajectory.snapshots[-1].curve)),
        psw_sample_study(),
    ]
    emit(trajectory, reports, args.out)
    ok = _print_reports(reports, args.quiet)
    if trajectory.metadata["termination"] == "dt_underflow":
        print("run aborted: dt underflow", file=sys.stderr)
        return 1
    return 0 if ok else 1


def _cmd_psw(args) -> int:
    length = math.pi
    grid = 4096
    s = np.linspace(0.0, length, grid + 1)
    reports = [
        psw_sample_study(seed=args.seed),
        check_psw(np.cos(s), length, "mean-zero"),
        check_psw(np.sin(s), length, "dirichlet"),
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"schema_version": SCHEMA_VERSION,
                   "reports": [asdict(report) for report in reports]},
                  fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return 0 if _print_reports(reports, args.quiet) else 1


def _cmd_sweep(args) -> int:
    try:
        doc = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration is not valid YAML: {exc}") from exc
    failures = 0
    for name, cell in sweep_cells(doc or {}):
        config, spec, echo = _config_from_dict(cell)
        if args.snapshot_every is not None:
            config = replace(config, snapshot_every=args.snapshot_every)
            echo = {**echo, "snapshot_every": args.snapshot_every}
        cell_dir = Path(args.out) / name
        trajectory = _run_one(echo, config, spec, cell_dir, args.quiet)
        status = trajectory.metadata["termination"]
        if status == "dt_underflow":
            failures += 1
        if not args.quiet:
            print(f"cell {name}: termination={status} -> {cell_dir}")
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hexaflow",
        description="Sixth-order curve-straightening flow between parallel lines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, config_required: bool):
        if config_required:
            p.add_argument("--config", required=True, help="YAML configuration file")
            p.add_argument("--snapshot-every", type=int, default=None,
                           help="override snapshot cadence (steps)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_run = sub.add_parser("run", help="simulate and write diagnostics")
    add_common(p_run, True)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="simulate, then run every verification check")
    add_common(p_verify, True)
    p_verify.set_defaults(func=_cmd_verify)

    p_psw = sub.add_parser("psw", help="sample the Poincare-type inequalities")
    p_psw.add_argument("--seed", type=int, default=0, help="random seed (recorded)")
    add_common(p_psw, False)
    p_psw.set_defaults(func=_cmd_psw)

    p_sweep = sub.add_parser("sweep", help="run a grid of configurations")
    add_common(p_sweep, True)
    p_sweep.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
