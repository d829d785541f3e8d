"""Command-line entry point: ``python3 -m xpmeit {run,list,fit,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import XpmError
from .fitting import fit_phase_profile


def _load_config(target: str) -> harness.ScenarioConfig:
    if target in harness.PRESETS:
        return harness.get_preset(target)
    path = Path(target)
    if path.suffix == ".json" and path.exists():
        return harness.ScenarioConfig.from_json(path.read_text())
    raise XpmError(f"{target!r} is neither a preset ({', '.join(harness.PRESETS)}) nor a JSON config file")


def cmd_run(args) -> int:
    cfg = _load_config(args.target)
    changes = {}
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.engine is not None:
        changes["engine"] = args.engine
    if args.shots is not None:
        changes["detection"] = replace(cfg.detection, n_shots=args.shots)
    cfg = cfg.with_(**changes)
    result = harness.run_scenario(cfg)
    for row in result.table.rows:
        if row["status"] == "ok":
            print(
                f"[{row['index']}] {cfg.sweep}={row['sweep_value']:.4g}  peak={row['peak_phase']:.4g} rad  "
                f"rise={row['rise'] * 1e9:.1f} ns  fall={row['fall'] * 1e9:.1f} ns"
            )
        else:
            print(f"[{row['index']}] {cfg.sweep}={row['sweep_value']:.4g}  FAILED: {row['error']}", file=sys.stderr)
    print(f"wrote {len(result.files)} files to {Path(cfg.out_dir) / cfg.scenario}")
    return 0 if result.ok else 1


def cmd_list(args) -> int:
    for name, desc in harness.list_presets().items():
        print(f"{name:<26}{desc}")
    return 0


def cmd_fit(args) -> int:
    trace = harness.read_trace_csv(args.trace)
    fit = fit_phase_profile(trace)
    err = fit.errors
    out = {
        "converged": bool(fit.converged),
        "n_iterations": fit.n_iterations,
        "residual_rms": fit.residual_rms,
        "fall_1e": fit.fall_1e,
        "params": dict(fit.params._asdict()),
        "errors": dict(err._asdict()),
    }
    print(json.dumps(out, indent=2))
    return 0 if fit.converged else 1


def cmd_validate(args) -> int:
    cfg = harness.get_preset("validation-lti-vs-bloch")
    if args.engine:
        cfg = cfg.with_(engine=args.engine)
    rows = harness.compare_engines(cfg)
    out = Path(args.out or cfg.out_dir) / cfg.scenario
    out.mkdir(parents=True, exist_ok=True)
    (out / "engine_comparison.csv").write_text(harness.validation_csv(cfg, rows))
    ok = True
    for r in rows:
        if r["error"]:
            ok = False
            print(f"window {r['window_hz'] / 1e6:.2f} MHz: FAILED {r['error']}", file=sys.stderr)
            continue
        good = r["rel_diff"] < 0.10
        ok &= good
        print(
            f"window {r['window_hz'] / 1e6:.2f} MHz: integrated bloch={r['integrated_bloch']:.4g} "
            f"lti={r['integrated_lti']:.4g} rel.diff={r['rel_diff']:.3%} {'ok' if good else 'MISMATCH'}"
        )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xpmeit", description="Transient EIT cross-phase modulation simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON scenario config")
    run.add_argument("target", help="preset name or path to config.json")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--engine", choices=harness.ENGINES)
    run.add_argument("--shots", type=int, help="shots averaged per sweep point")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="list presets")
    lst.set_defaults(func=cmd_list)

    fit = sub.add_parser("fit", help="fit the LTI profile to a trace CSV")
    fit.add_argument("trace")
    fit.set_defaults(func=cmd_fit)

    val = sub.add_parser("validate", help="LTI vs Bloch integrated-phase cross-check")
    val.add_argument("--out", help="output directory")
    val.add_argument("--engine", choices=("bloch", "bloch-slabs"))
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (XpmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
