"""Command-line entry point.

``run``, ``two-phase`` and ``sweep`` execute headless experiments in
process and write reproducible artifacts.  ``serve`` starts the HTTP
service around a paced engine.  ``ctl`` is a thin client for a running
service.  ``validate`` lints scenario and goal-model documents.
"""

from __future__ import annotations

import argparse
import json
import sys

from .goals import ParseError, ValidationError, load_goal_model
from .scenario import InvalidScenario, load_scenario


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def cmd_run(args) -> int:
    from .experiments import run_scenario
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            scenario = scenario.with_seed(args.seed)
        scenario.validate_fields()
    except InvalidScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    artifacts = run_scenario(scenario, duration=args.duration, out_dir=args.out)
    print(f"wrote {artifacts.metrics_path}")
    if artifacts.events_path:
        print(f"wrote {artifacts.events_path}")
    print(f"wrote {artifacts.histogram_path}")
    print(f"wrote {artifacts.summary_path}")
    return 0


def cmd_two_phase(args) -> int:
    from .experiments import run_two_phase
    try:
        scenario = load_scenario(args.scenario)
    except InvalidScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = run_two_phase(args.out, y=args.y, seeds=_parse_ints(args.seeds),
                            phase_duration=args.phase_duration, scenario=scenario,
                            distribution=args.distribution)
    ratios = [e["service_ratio"] for e in summary["per_seed"]]
    print(f"seeds: {summary['seeds']}")
    print(f"service ratios (phase2 last-20 / phase1 steady): "
          f"{[round(r, 2) if r else None for r in ratios]}")
    print(f"phase-2 sub-saturated safety lower in {summary['phase2_safety_lower_count']}"
          f"/{len(summary['seeds'])} seeds")
    print(f"wrote {args.out}/two_phase_summary.json")
    return 0


def cmd_sweep(args) -> int:
    from .experiments import run_sweep
    try:
        scenario = load_scenario(args.scenario)
    except InvalidScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    candidates = _parse_floats(args.candidates)
    if not candidates:
        print("error: no sweep candidates", file=sys.stderr)
        return 2
    summary = run_sweep(args.out, candidates=candidates,
                        phase_duration=args.phase_duration,
                        horizon=args.horizon, replications=args.replications,
                        seed=args.seed, seed_base=args.seed_base,
                        scenario=scenario, parallel=not args.serial)
    for phase in ("phase1", "phase2"):
        print(f"[{phase}]")
        for row in summary["phases"][phase]:
            flag = "*" if row["on_pareto_front"] else " "
            print(f"  {flag} {row['alternative_id']:>7}  "
                  f"safety={row['safety_score']:.4f}  "
                  f"productivity={row['productivity_score']:.4f}")
    print(f"wrote {args.out}/sweep_summary.json")
    return 0


def cmd_validate(args) -> int:
    status = 0
    if args.scenario:
        try:
            scenario = load_scenario(args.scenario)
            scenario.validate_fields()
            print(f"scenario {args.scenario}: ok")
        except InvalidScenario as exc:
            print(f"scenario {args.scenario}: INVALID: {exc}", file=sys.stderr)
            status = 1
    if args.goal_model:
        try:
            model = load_goal_model(args.goal_model)
            print(f"goal model {args.goal_model}: ok ({len(model.nodes)} nodes, "
                  f"{len(model.xor_groups())} XOR group(s))")
        except (ParseError, ValidationError) as exc:
            print(f"goal model {args.goal_model}: INVALID: {exc}", file=sys.stderr)
            status = 1
    if not args.scenario and not args.goal_model:
        print("nothing to validate; pass --scenario and/or --goal-model", file=sys.stderr)
        status = 2
    return status


def cmd_serve(args) -> int:
    import uvicorn

    from .metrics import Preference
    from .orchestrator import Engine, LoopConfig, PacedRunner
    from .service import create_app
    try:
        scenario = load_scenario(args.scenario).with_seed(args.seed)
        goal_model = load_goal_model(args.goal_model)
    except (InvalidScenario, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    loop = LoopConfig(auto_enact=args.auto_enact, time_scale=args.time_scale)
    engine = Engine(scenario, goal_model=goal_model, loop=loop,
                    preference=Preference(0.5, 0.5))
    runner = PacedRunner(engine)
    runner.start()
    app = create_app(engine, runner)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        runner.stop()
    return 0


def cmd_ctl(args) -> int:
    import requests
    base = args.url.rstrip("/")
    try:
        if args.ctl_command == "state":
            r = requests.get(f"{base}/state", timeout=10)
        elif args.ctl_command == "metrics":
            r = requests.get(f"{base}/metrics", params={"window": args.window}, timeout=10)
        elif args.ctl_command == "alternatives":
            r = requests.get(f"{base}/alternatives", timeout=10)
        elif args.ctl_command == "whatif":
            body = {"horizon": args.horizon, "replications": args.replications}
            r = requests.post(f"{base}/whatif", json=body, timeout=10)
        elif args.ctl_command == "result":
            r = requests.get(f"{base}/whatif/{args.analysis_id}", timeout=10)
        elif args.ctl_command == "preference":
            r = requests.post(f"{base}/preference",
                              json={"w_s": args.w_s, "w_p": args.w_p}, timeout=10)
        elif args.ctl_command == "enact":
            r = requests.post(f"{base}/enact",
                              json={"alternative_id": args.alternative_id,
                                    "analysis_id": args.analysis_id}, timeout=10)
        elif args.ctl_command == "pause":
            r = requests.post(f"{base}/control", json={"action": "pause"}, timeout=10)
        elif args.ctl_command == "resume":
            r = requests.post(f"{base}/control", json={"action": "resume"}, timeout=10)
        elif args.ctl_command == "time-scale":
            r = requests.post(f"{base}/control",
                              json={"action": "time_scale", "value": args.value}, timeout=10)
        else:
            print(f"unknown ctl command {args.ctl_command!r}", file=sys.stderr)
            return 2
    except requests.RequestException as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(r.json(), indent=1, sort_keys=True))
    return 0 if r.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warehouse-twin",
                                     description="Digital-twin warehouse simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and export artifacts")
    p.add_argument("--scenario", default="default")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario file's seed")
    p.add_argument("--duration", type=float, default=7200.0)
    p.add_argument("--out", default="out/run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("two-phase", help="slow-then-fast arrival study under one rule")
    p.add_argument("--scenario", default="default")
    p.add_argument("--y", type=float, default=5.0, help="slow radius in meters")
    p.add_argument("--seeds", default="1,2,3,4,5,6,7,8,9,10")
    p.add_argument("--phase-duration", type=float, default=3600.0)
    p.add_argument("--distribution", choices=("fixed", "exponential"), default="fixed")
    p.add_argument("--out", default="out/two-phase")
    p.set_defaults(func=cmd_two_phase)

    p = sub.add_parser("sweep", help="what-if sweep over slow-radius candidates")
    p.add_argument("--scenario", default="default")
    p.add_argument("--candidates", default="1,2,3,4.5,5")
    p.add_argument("--phase-duration", type=float, default=3600.0)
    p.add_argument("--horizon", type=float, default=600.0)
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--seed-base", type=int, default=9001)
    p.add_argument("--serial", action="store_true", help="disable the process pool")
    p.add_argument("--out", default="out/sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="lint a scenario and/or goal model")
    p.add_argument("--scenario")
    p.add_argument("--goal-model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--scenario", default="default")
    p.add_argument("--goal-model", default="default")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--time-scale", type=float, default=10.0)
    p.add_argument("--auto-enact", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ctl", help="thin client for a running service")
    p.add_argument("--url", default="http://127.0.0.1:8000")
    ctl_sub = p.add_subparsers(dest="ctl_command", required=True)
    ctl_sub.add_parser("state")
    pm = ctl_sub.add_parser("metrics")
    pm.add_argument("--window", type=int, default=600)
    ctl_sub.add_parser("alternatives")
    pw = ctl_sub.add_parser("whatif")
    pw.add_argument("--horizon", type=float, default=600.0)
    pw.add_argument("--replications", type=int, default=5)
    pr = ctl_sub.add_parser("result")
    pr.add_argument("analysis_id")
    pp = ctl_sub.add_parser("preference")
    pp.add_argument("w_s", type=float)
    pp.add_argument("w_p", type=float)
    pe = ctl_sub.add_parser("enact")
    pe.add_argument("alternative_id")
    pe.add_argument("analysis_id")
    ctl_sub.add_parser("pause")
    ctl_sub.add_parser("resume")
    pt = ctl_sub.add_parser("time-scale")
    pt.add_argument("value", type=float)
    p.set_defaults(func=cmd_ctl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
