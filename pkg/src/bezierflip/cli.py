"""``reconstruct``: run a built-in experiment and write its artifacts.

Outputs in the output directory:

- ``history.csv``: one row per iteration (k, J, alpha, components,
  flip_attempted, flip_accepted, control_points)
- ``frame_<k>.svg``: every ``frame_every`` iterations and at every flip
- ``final_shape.json``: control points of the last iterate
- ``effective_config.json``: every setting actually used

Exit status is 0 on completion, 1 for a bad configuration and 2 when the
solver aborts (the last shape is then dumped to ``abort_shape.json``).
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .optimizer import OptimizerConfig, run_algorithm_A
from .pde import DomainSpec, synthesize_measurement
from .render import render_svg
from .scenarios import builtin_scenarios, get_scenario

HISTORY_COLUMNS = ["k", "J", "alpha", "components", "flip_attempted", "flip_accepted", "control_points"]
CONFIG_KEYS = {"scenario", "frame_every", "optimizer"}

log = logging.getLogger("bezierflip")


class ConfigError(Exception):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def effective_settings(args) -> tuple:
    """Merge scenario overrides, config file and flags (later wins)."""
    file_cfg = load_config(args.config) if args.config else {}
    name = args.scenario or file_cfg.get("scenario")
    if not name:
        raise ConfigError("no scenario given (use --scenario or a config with 'scenario')")
    try:
        scenario = get_scenario(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc

    opt = dict(scenario.overrides)
    opt.update(file_cfg.get("optimizer", {}))
    flags = {"max_iterations": args.max_iter, "h_max": args.h_max, "flip_tolerance": args.lam, "seed": args.seed}
    opt.update({k: v for k, v in flags.items() if v is not None})
    try:
        if isinstance(opt.get("domain"), dict):
            opt["domain"] = DomainSpec(**opt["domain"])
        cfg = OptimizerConfig.from_dict(opt)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid optimizer settings: {exc}") from exc

    frame_every = file_cfg.get("frame_every", 10)
    if not isinstance(frame_every, int) or frame_every < 1:
        raise ConfigError("frame_every must be a positive integer")
    return scenario, cfg, frame_every


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run(args) -> int:
    try:
        scenario, cfg, frame_every = effective_settings(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(os.environ.get("BEZIERFLIP_OUT") or args.out)
    out.mkdir(parents=True, exist_ok=True)
    effective = {"scenario": scenario.name, "frame_every": frame_every, "optimizer": cfg.to_dict()}
    (out / "effective_config.json").write_text(json.dumps(effective, indent=2, sort_keys=True) + "\n")

    target = scenario.target()
    initial = scenario.initial()
    f_b = synthesize_measurement(target, cfg.domain, h_max=cfg.h_max, m=cfg.samples_per_patch)

    with open(out / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)

        def on_iteration(state, shape, rec):
            writer.writerow([_fmt(getattr(rec, c)) for c in HISTORY_COLUMNS])
            fh.flush()
            if rec.k % frame_every == 0 or rec.flip_attempted:
                render_svg(shape, target, cfg.domain, out / f"frame_{rec.k}.svg")

        try:
            state = run_algorithm_A(initial, f_b, cfg, on_iteration)
        except (RuntimeError, ValueError) as exc:
            log.error("solver aborted: %s", exc)
            last = getattr(exc, "shape", None)
            if last is not None:
                (out / "abort_shape.json").write_text(last.to_json())
            return 2

    (out / "final_shape.json").write_text(state.shape.to_json())
    if state.history:
        render_svg(state.shape, target, cfg.domain, out / f"frame_{state.history[-1].k + 1}.svg")
    last = state.history[-1] if state.history else None
    if last is not None:
        log.info("done: %d iterations, J = %.6g, %d component(s)", len(state.history), last.J, len(state.shape))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reconstruct", description="Bezier shape reconstruction with topology flips.")
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--config", help="JSON config: {scenario, frame_every, optimizer: {...}}")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--out", default="out", help="output directory (BEZIERFLIP_OUT overrides)")
    p.add_argument("--h-max", type=float, dest="h_max")
    p.add_argument("--lambda", type=float, dest="lam", help="flip tolerance")
    p.add_argument("--seed", type=int)
    p.add_argument("--list-scenarios", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    if args.list_scenarios:
        for sc in builtin_scenarios():
            print(f"{sc.name}\t{sc.description}")
        return 0
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
