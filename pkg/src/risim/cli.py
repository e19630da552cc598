"""Command-line front end.

Every run merges an optional built-in preset, an optional YAML config file
and ``--set key=value`` overrides (in that order), writes its outputs
atomically into the output directory and records a ``manifest.json`` that
is enough to reproduce the run.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .codebook import build_feed_codeword, build_codeword, codebook_to_dict
from .core import Direction, GeometryError, local_direction
from .link import LinkParams, pathloss_curve
from .pattern import (
    analyze_pattern,
    angle_grid,
    cut_to_csv,
    feed_illumination,
    pattern_cut,
    plane_wave_illumination,
)
from .scenario import (
    PRESETS,
    InfeasibleScenario,
    Scenario,
    coverage_map,
    coverage_stats,
    scenario_codebook,
)
from .signal import DEFAULT_SEED, beam_sweep, steering_direction, synthesize_channels

COMMANDS = ("codebook", "pattern", "sweep", "linkbudget", "coverage")
OUT_ENV = "RISIM_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2

EXPERIMENT_DEFAULTS = {
    "pattern": {
        "theta_d": 30.0,
        "plane": "azimuth",
        "start_deg": -90.0,
        "stop_deg": 90.0,
        "step_deg": 0.25,
        "illumination": "feed",
        "dither_seed": None,
    },
    "sweep": {"noisy": True},
    "linkbudget": {"distances_m": [10.0, 20.0, 40.0], "angles_deg": [10.0, 20.0, 30.0]},
    "coverage": {"noisy": True},
}


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------


def deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad override key {key!r}")
    node = config
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-section value")
    node[parts[-1]] = yaml.safe_load(raw)


def load_config(preset: str | None, path: str | None, overrides=()) -> dict:
    config: dict = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping")
        config = loaded
    preset = preset or config.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = {"preset": preset, "scenario": PRESETS[preset]().to_dict()}
        config = deep_merge(base, config)
    for assignment in overrides:
        apply_override(config, assignment)
    if "scenario" not in config:
        raise ConfigError("no scenario: give --preset or a config with a 'scenario' section")
    for name, defaults in EXPERIMENT_DEFAULTS.items():
        config[name] = deep_merge(defaults, config.get(name) or {})
    return config


def _positive(diags, path, value):
    try:
        ok = float(value) > 0
    except (TypeError, ValueError):
        diags.append(f"{path}: expected a number, got {value!r}")
        return
    if not ok:
        diags.append(f"{path}: must be positive, got {value!r}")


def _vector(diags, path, value, n=3):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        diags.append(f"{path}: expected {n} numbers")
        return
    if arr.shape != (n,):
        diags.append(f"{path}: expected {n} numbers, got {value!r}")


def scenario_diagnostics(sc: dict) -> list[str]:
    """Field-level schema checks, without constructing anything."""
    diags: list[str] = []
    if not isinstance(sc, dict):
        return ["scenario: expected a mapping"]
    for section in ("bs", "ris", "ue_grid"):
        if not isinstance(sc.get(section), dict):
            diags.append(f"scenario.{section}: missing section")
    if "frequency_hz" not in sc:
        diags.append("scenario.frequency_hz: missing")
    else:
        _positive(diags, "scenario.frequency_hz", sc["frequency_hz"])
    if diags:
        return diags
    bs, ris, ue = sc["bs"], sc["ris"], sc["ue_grid"]
    _vector(diags, "scenario.bs.position", bs.get("position"))
    _vector(diags, "scenario.bs.boresight", bs.get("boresight"))
    _vector(diags, "scenario.ris.position", ris.get("position"))
    _vector(diags, "scenario.ris.normal", ris.get("normal"))
    for key in ("rows", "cols", "spacing_x", "spacing_y"):
        if key in ris:
            _positive(diags, f"scenario.ris.{key}", ris[key])
    eff = ris.get("efficiency", 1.0)
    try:
        if not 0 < float(eff) <= 1:
            diags.append(f"scenario.ris.efficiency: must lie in (0, 1], got {eff!r}")
    except (TypeError, ValueError):
        diags.append(f"scenario.ris.efficiency: expected a number, got {eff!r}")
    pts = ue.get("points")
    try:
        arr = np.asarray(pts, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
            diags.append("scenario.ue_grid.points: expected a non-empty list of [x, y, z]")
    except (TypeError, ValueError):
        diags.append("scenario.ue_grid.points: expected a non-empty list of [x, y, z]")
    for i, blk in enumerate(sc.get("blockers") or []):
        _vector(diags, f"scenario.blockers[{i}].center", blk.get("center"))
        ext = blk.get("extents")
        _vector(diags, f"scenario.blockers[{i}].extents", ext)
        if ext is not None and np.asarray(ext).shape == (3,) and min(map(float, ext)) <= 0:
            diags.append(f"scenario.blockers[{i}].extents: must be positive")
    wf = sc.get("waveform") or {}
    for key in ("subcarriers", "bandwidth_hz", "tx_power_w"):
        if key in wf:
            _positive(diags, f"scenario.waveform.{key}", wf[key])
    return diags


def validate_config(config: dict) -> list[str]:
    """Schema and feasibility diagnostics for a merged config."""
    diags = scenario_diagnostics(config.get("scenario"))
    pat = config.get("pattern", {})
    if pat.get("plane") not in ("azimuth", "elevation"):
        diags.append(f"pattern.plane: must be azimuth or elevation, got {pat.get('plane')!r}")
    if pat.get("illumination") not in ("feed", "plane"):
        diags.append(f"pattern.illumination: must be feed or plane, got {pat.get('illumination')!r}")
    if diags:
        return diags
    try:
        scenario = Scenario.from_dict(config["scenario"])
    except (ValueError, KeyError, TypeError) as exc:
        return [f"scenario: {exc}"]
    try:
        scenario.check_feasible()
    except InfeasibleScenario as exc:
        diags.append(f"infeasible: {exc}")
    return diags


def validate(path: str) -> list[str]:
    """Diagnostics for a config file; raises :class:`ConfigError` if unreadable."""
    return validate_config(load_config(None, path))


# -- experiments -----------------------------------------------------------------


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def run_codebook(scenario: Scenario, config: dict, seed: int) -> dict[str, str]:
    book = scenario_codebook(scenario)
    if book is None:
        raise ConfigError("codebook.reflect_deg is empty")
    return {"codebook.json": _json(codebook_to_dict(book))}


def run_pattern(scenario: Scenario, config: dict, seed: int) -> dict[str, str]:
    opts = config["pattern"]
    geometry, wave = scenario.geometry, scenario.wave
    reflect = Direction.from_cut_angle(float(opts["theta_d"]))
    dither = opts.get("dither_seed")
    if opts["illumination"] == "feed":
        if scenario.feed is not None:
            feed_pos, gain = scenario.feed.position(), scenario.feed.gain_dbi
        else:
            feed_pos, gain = scenario.ris.to_local(scenario.bs.origin), scenario.bs_gain_dbi
        illum = feed_illumination(geometry, wave, feed_pos, gain)
        cw = build_feed_codeword(geometry, wave, feed_pos, reflect, dither)
    else:
        incident = scenario.incident_direction()
        illum = plane_wave_illumination(geometry, wave, incident)
        cw = build_codeword(geometry, wave, incident, reflect, dither)
    grid = angle_grid(float(opts["start_deg"]), float(opts["stop_deg"]), float(opts["step_deg"]))
    cut = pattern_cut(geometry, wave, cw, illum, opts["plane"], grid, scenario.states)
    return {"pattern.csv": cut_to_csv(cut), "metrics.json": _json(analyze_pattern(cut, float(opts["theta_d"])).to_dict())}


def _ue_channels(scenario: Scenario, ue):
    from .scenario import los_blocked

    return synthesize_channels(
        scenario.bs,
        scenario.ris,
        ue,
        scenario.geometry,
        scenario.ofdm,
        bs_antenna=scenario.bs_antenna,
        ue_antenna=scenario.ue_antenna(ue),
        eta=scenario.eta,
        direct_blocked=los_blocked(scenario.bs.origin, ue, scenario.blockers),
        ris_blocked=los_blocked(scenario.ris.origin, ue, scenario.blockers),
    )


def run_sweep(scenario: Scenario, config: dict, seed: int) -> dict[str, str]:
    book = scenario_codebook(scenario)
    if book is None:
        raise ConfigError("codebook.reflect_deg is empty")
    noisy = bool(config["sweep"].get("noisy", True))
    outputs = {}
    rows = ["ue_index,ue_theta_deg,ue_phi_deg,selected_index,selected_theta_deg,selected_phi_deg"]
    for j, ue in enumerate(scenario.ue_points):
        ch = _ue_channels(scenario, ue)
        result = beam_sweep(book, ch, scenario.ofdm, seed if noisy else None, scenario.states, (j,))
        outputs[f"sweep_{j:03d}.csv"] = result.to_csv(book)
        try:
            d = steering_direction(scenario.ris, ue)
            ue_t, ue_p = f"{d.theta:.6g}", f"{d.phi:.6g}"
        except GeometryError:
            ue_t = ue_p = "nan"
        sel = book[result.selected].reflect
        rows.append(f"{j},{ue_t},{ue_p},{result.selected},{sel.theta:.6g},{sel.phi:.6g}")
    outputs["selection.csv"] = "\n".join(rows) + "\n"
    return outputs


def run_linkbudget(scenario: Scenario, config: dict, seed: int) -> dict[str, str]:
    opts = config["linkbudget"]
    _, r_i = local_direction(scenario.ris, scenario.bs.origin)
    theta_i = scenario.incident_direction().theta
    ofdm = scenario.ofdm
    template = LinkParams.from_dbi(
        ofdm.total_power,
        scenario.bs_gain_dbi,
        scenario.ue_gain_dbi,
        r_i,
        float(opts["distances_m"][0]),
        scenario.geometry.area,
        eta=scenario.eta,
        theta_i=theta_i,
        noise_power=ofdm.subcarriers * ofdm.noise_variance,
    )
    table = pathloss_curve(template, scenario.wave, opts["distances_m"], opts["angles_deg"])
    return {"pathloss.csv": table.to_csv()}


def run_coverage(scenario: Scenario, config: dict, seed: int) -> dict[str, str]:
    noisy = bool(config["coverage"].get("noisy", True))
    book = scenario_codebook(scenario)
    cmap = coverage_map(scenario, book, seed if noisy else None)
    return {
        "coverage.csv": cmap.to_csv(),
        "coverage_stats.json": _json(coverage_stats(cmap).to_dict()),
    }


RUNNERS = {
    "codebook": run_codebook,
    "pattern": run_pattern,
    "sweep": run_sweep,
    "linkbudget": run_linkbudget,
    "coverage": run_coverage,
}


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def run(command: str, config: dict, out_dir, seed: int = DEFAULT_SEED) -> dict[str, str]:
    """Run one experiment and write its outputs plus ``manifest.json``.

    Raises :class:`ConfigError` for bad configs and
    :class:`~risim.scenario.InfeasibleScenario` for infeasible geometry.
    """
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    diags = validate_config(config)
    infeasible = [d for d in diags if d.startswith("infeasible:")]
    if len(infeasible) != len(diags):
        raise ConfigError("; ".join(d for d in diags if d not in infeasible))
    if infeasible:
        raise InfeasibleScenario(infeasible[0].removeprefix("infeasible: "))
    scenario = Scenario.from_dict(config["scenario"])
    outputs = RUNNERS[command](scenario, config, seed)

    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "tool": "risim",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "config": config,
        "outputs": {
            name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(outputs.items())
        },
    }
    outputs["manifest.json"] = _json(manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        _atomic_write(out / name, text)
    return outputs


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risim", description="RIS link, pattern and coverage simulator")
    p.add_argument("--version", action="version", version=f"risim {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
        sp.add_argument(
            "--out", default=None, help=f"output directory (default ${OUT_ENV} or ./risim-out)"
        )
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config value, e.g. pattern.theta_d=45 (repeatable)",
        )

    for name in COMMANDS:
        common(sub.add_parser(name, help=f"run the {name} experiment"))
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; bad invocations count as bad config
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("risim: error: a command is required", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        try:
            diags = validate(args.config)
        except ConfigError as exc:
            print(f"risim: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for d in diags:
            print(d)
        if not diags:
            print("ok")
            return EXIT_OK
        return EXIT_INFEASIBLE if all(d.startswith("infeasible:") for d in diags) else EXIT_CONFIG

    out = args.out or os.environ.get(OUT_ENV) or "risim-out"
    try:
        config = load_config(args.preset, args.config, args.overrides)
        outputs = run(args.command, config, out, args.seed)
    except ConfigError as exc:
        print(f"risim: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenario as exc:
        print(f"risim: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, GeometryError) as exc:
        print(f"risim: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in sorted(outputs):
        print(Path(out) / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
