"""Command-line front end.

Three subcommands share the flat dotted-key config format:

- ``process``: enhance a recorded far-end / microphone WAV pair.
- ``simulate``: synthesize a scene, run one engine, emit metric curves;
  supports a one-axis parameter sweep.
- ``compare``: run two or more named engine configs on the identical scene.

Exit codes: 0 success, 1 usage error (bad arguments, unreadable inputs,
invalid config), 2 runtime error. All randomness flows from the scene seed
(or ``--seed``), so repeated runs write byte-identical CSV and WAV outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio_io import (
    AudioFormatError,
    ResultTable,
    SampleRateError,
    read_wav,
    write_result_csv,
    write_wav,
)
from .metrics import erle, steady_state, terle
from .pipeline import engine_from_mapping, run
from .sim import parse_flat_config, scene_from_mapping, synthesize_scene

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_TOP_PREFIXES = {"scene", "room", "nonlinearity", "far_end", "near_end", "engine", "sweep"}


class UsageError(Exception):
    """Bad command line, unreadable input, or invalid configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="naec", description="online semi-blind echo cancellation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--out-dir", type=Path, default=Path("."),
                       help="directory for outputs (default: current directory)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scene seed")

    p = sub.add_parser("process", help="enhance a far-end / microphone WAV pair")
    p.add_argument("far_wav", type=Path)
    p.add_argument("mic_wav", type=Path)
    common(p)
    p = sub.add_parser("simulate", help="run a synthetic scene and emit metrics")
    common(p)
    p = sub.add_parser("compare", help="run several engine configs on one scene")
    common(p)
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        mapping = parse_flat_config(text)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    unknown = {k for k in mapping if k.split(".", 1)[0] not in _TOP_PREFIXES}
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {sorted(unknown)}")
    return mapping


def _read_input(path: Path):
    try:
        return read_wav(path)
    except FileNotFoundError as exc:
        raise UsageError(f"input file not found: {path}") from exc
    except (AudioFormatError, SampleRateError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _scene(mapping, base_dir, seed):
    try:
        return scene_from_mapping(mapping, base_dir=base_dir, seed_override=seed)
    except (ValueError, OSError, AudioFormatError, SampleRateError) as exc:
        raise UsageError(str(exc)) from exc


def _engine(mapping, prefix="engine"):
    try:
        return engine_from_mapping(mapping, prefix=prefix)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _engine_section_names(mapping) -> list:
    names = []
    for key in mapping:
        parts = key.split(".")
        if parts[0] == "engine" and len(parts) >= 3 and parts[1] not in names:
            names.append(parts[1])
    return names


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _stats_dict(stats) -> dict:
    return {
        "n_frames": stats.n_frames,
        "skipped_bins": stats.skipped_bins,
        "elapsed_s": stats.elapsed_s,
        "realtime_factor": stats.realtime_factor,
    }


def _cmd_process(args, out_dir: Path) -> None:
    far = _read_input(args.far_wav)
    mic = _read_input(args.mic_wav)
    if len(far) != len(mic):
        raise UsageError(
            f"length mismatch: {args.far_wav} has {len(far)} samples, "
            f"{args.mic_wav} has {len(mic)}"
        )
    mapping = _load_config(args.config)
    bad = [k for k in mapping if not k.startswith("engine.")]
    if bad:
        raise UsageError(f"process accepts only engine.* config keys, got {sorted(bad)}")
    enhanced, stats = run(far, mic, _engine(mapping))
    write_wav(enhanced, out_dir / "enhanced.wav")
    _write_json({"command": "process", "stats": _stats_dict(stats)},
                out_dir / "summary.json")
    print(f"frames processed: {stats.n_frames}")
    print(f"skipped bins: {stats.skipped_bins}")
    print(f"real-time factor: {stats.realtime_factor:.2f}")


def _evaluate(comps, enhanced):
    """Metric curves and steady-state values for one processed scene."""
    curves = {"erle": erle(comps.microphone, enhanced)}
    ss = {"erle_db": steady_state(curves["erle"])}
    if len(comps.near) and comps.near.samples.any():
        curves["terle"] = terle(comps.echo, enhanced, comps.near)
        ss["terle_db"] = steady_state(curves["terle"])
    return curves, ss


def _write_scene_wavs(out_dir: Path, far, comps, enhanced, suffix="") -> None:
    write_wav(far, out_dir / f"far{suffix}.wav")
    write_wav(comps.microphone, out_dir / f"microphone{suffix}.wav")
    write_wav(comps.echo, out_dir / f"echo{suffix}.wav")
    if comps.near.samples.any():
        write_wav(comps.near, out_dir / f"near{suffix}.wav")
    if enhanced is not None:
        write_wav(enhanced, out_dir / f"enhanced{suffix}.wav")


def _cmd_simulate(args, out_dir: Path) -> None:
    if args.config is None:
        raise UsageError("simulate requires --config")
    mapping = _load_config(args.config)
    if _engine_section_names(mapping):
        raise UsageError("simulate uses plain engine.* keys; use compare for "
                         "multiple engine sections")
    sweep_keys = {k for k in mapping if k.startswith("sweep.")}
    if sweep_keys - {"sweep.key", "sweep.values"}:
        raise UsageError(f"unknown sweep keys: "
                         f"{sorted(sweep_keys - {'sweep.key', 'sweep.values'})}")
    sweep_key = mapping.get("sweep.key")
    sweep_values = mapping.get("sweep.values")
    if (sweep_key is None) != (sweep_values is None):
        raise UsageError("sweep.key and sweep.values must be given together")

    base_dir = args.config.parent
    grid = sweep_values.split() if sweep_values else [None]
    if not grid:
        raise UsageError("sweep.values is empty")
    all_curves = {}
    results = []
    for token in grid:
        m = dict(mapping)
        if token is not None:
            m[sweep_key] = token
        scene = _scene(m, base_dir, args.seed)
        comps = synthesize_scene(scene)
        enhanced, stats = run(scene.far_end, comps.microphone, _engine(m))
        curves, ss = _evaluate(comps, enhanced)
        tag = "" if token is None else f"[{sweep_key}={token}]"
        for label, curve in curves.items():
            all_curves[label + tag] = curve
        results.append({
            "grid": {} if token is None else {sweep_key: token},
            "steady_state": ss,
            "stats": _stats_dict(stats),
        })
        if token is None:
            _write_scene_wavs(out_dir, scene.far_end, comps, enhanced)
        shown = " ".join(f"{k}={v:.2f} dB" for k, v in sorted(ss.items()))
        print(f"simulate{tag}: {shown}")
    write_result_csv(ResultTable.from_curves(all_curves), out_dir / "metrics.csv")
    _write_json({
        "command": "simulate",
        "seed": args.seed,
        "sweep": None if sweep_key is None
        else {"key": sweep_key, "values": grid},
        "results": results,
    }, out_dir / "summary.json")


def _cmd_compare(args, out_dir: Path) -> None:
    if args.config is None:
        raise UsageError("compare requires --config")
    mapping = _load_config(args.config)
    if any(k.startswith("sweep.") for k in mapping):
        raise UsageError("sweep is only supported by simulate")
    names = _engine_section_names(mapping)
    if len(names) < 2:
        raise UsageError("compare requires at least two engine.<name>.* sections")
    plain = [k for k in mapping if k.startswith("engine.") and len(k.split(".")) == 2]
    if plain:
        raise UsageError(f"compare uses only engine.<name>.* keys, got {sorted(plain)}")

    scene = _scene(mapping, args.config.parent, args.seed)
    comps = synthesize_scene(scene)
    _write_scene_wavs(out_dir, scene.far_end, comps, enhanced=None)
    all_curves = {}
    engines = []
    for name in names:
        enhanced, stats = run(scene.far_end, comps.microphone,
                              _engine(mapping, prefix=f"engine.{name}"))
        write_wav(enhanced, out_dir / f"enhanced.{name}.wav")
        curves, ss = _evaluate(comps, enhanced)
        for label, curve in curves.items():
            all_curves[f"{label}.{name}"] = curve
        engines.append({"name": name, "steady_state": ss,
                        "stats": _stats_dict(stats)})
        shown = " ".join(f"{k}={v:.2f} dB" for k, v in sorted(ss.items()))
        print(f"{name}: {shown}")
    write_result_csv(ResultTable.from_curves(all_curves), out_dir / "metrics.csv")
    _write_json({"command": "compare", "seed": args.seed, "engines": engines},
                out_dir / "summary.json")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        out_dir = args.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "process":
            _cmd_process(args, out_dir)
        elif args.command == "simulate":
            _cmd_simulate(args, out_dir)
        else:
            _cmd_compare(args, out_dir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
