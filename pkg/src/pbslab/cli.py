"""Command-line entry point: ``pbslab <command> ...``.

Exit codes: 0 success, 2 bad input, 3 a solve failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .conversion import convert, replay_schedule
from .decomposition import DecompConfig, decompose_best, make_sub_solver, write_trace
from .grid import render_ascii
from .heuristics import greedy_rollout
from .instances import InfeasibleSpec, Instance, elimination_bound, generate, load_instances, series
from .milp import Mode, ModelSpec, default_K, export_lp
from .oracle import SearchTooLarge, bfs_optimal
from .plan import InvalidPlan, Plan, SolveFailed, replay
from .prediction import REFERENCE_FIT, FitResult, ols_fit, predict, read_samples, samples_from_instances, write_samples

log = logging.getLogger("pbslab")

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 2, 3
POLICIES = ("bfs", "guided", "rl", "decomp")
RESULT_FIELDS = ("id", "policy", "objective", "success", "millis")


class InputError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    paths = sorted(path.rglob("*")) if path.is_dir() else [path]
    for p in paths:
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def write_manifest(out: Path, command: str, args: argparse.Namespace, inputs: Sequence[Path],
                   outputs: Sequence[Path], started: float, extra: Optional[dict] = None) -> Path:
    """Record how ``out`` was produced next to it as ``<out>.manifest.json``."""
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    payload = {
        "command": command,
        "version": __version__,
        "argv": sys.argv[1:],
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs if p.exists()},
        "outputs": [str(p) for p in outputs],
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "elapsed_s": round(time.time() - started, 3),
    }
    if extra:
        payload.update(extra)
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(payload, indent=1, default=str) + "\n")
    return path


def _load(path: str) -> list[Instance]:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such file or directory")
    try:
        out = load_instances(p)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if not out:
        raise InputError(f"{path}: no instances found")
    return out


# --- gen -------------------------------------------------------------------

def cmd_gen(args) -> int:
    started = time.time()
    try:
        spec = series(args.series, args.count)
        instances = generate(spec, args.seed)
    except (InfeasibleSpec, ValueError) as exc:
        raise InputError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for inst in instances:
        f = out / f"{inst.id}.json"
        f.write_text(json.dumps(inst.to_json()) + "\n")
        files.append(f)
    write_manifest(out / "instances", "gen", args, [], files, started, {"count": len(files)})
    print(f"wrote {len(files)} instances to {out}")
    return EXIT_OK


# --- solve -----------------------------------------------------------------

@dataclass
class _Job:
    index: int
    instance: Instance
    policy: str
    seed: int
    model: Optional[str]
    sub_solver: str
    runs: int
    plans_dir: Optional[str]


_AGENTS: dict = {}


def _agent(path: str):
    from .rl.agent import Agent

    if path not in _AGENTS:
        _AGENTS[path] = Agent.load(path)
    return _AGENTS[path]


def _run_job(job: _Job) -> tuple[str, str, Optional[int], float]:
    inst = job.instance
    bound = elimination_bound(max(inst.m, inst.n), inst.d)
    rng = np.random.default_rng([job.seed, job.index])
    t0 = time.perf_counter()
    plan: Optional[Plan] = None
    try:
        if job.policy == "bfs":
            plan = bfs_optimal(inst)
        elif job.policy == "guided":
            plan = greedy_rollout(inst, bound, rng)
        elif job.policy == "rl":
            from .rl.agent import policy_rollout

            plan = policy_rollout(_agent(job.model), inst, bound)
        elif job.policy == "decomp":
            agent = _agent(job.model) if job.sub_solver == "rl" else None
            cfg = DecompConfig(sub_solver=job.sub_solver, seed=job.seed + 1000 * job.index)
            plan = decompose_best(inst, cfg, job.runs, make_sub_solver(job.sub_solver, agent)).plan
    except (SolveFailed, SearchTooLarge) as exc:
        log.info("%s: %s", inst.id, exc)
    millis = (time.perf_counter() - t0) * 1000.0
    if plan is not None:
        replay(inst.state(), plan.moves)
        if job.plans_dir:
            plan.save(Path(job.plans_dir) / f"{inst.id}.{job.policy}.plan.json")
    obj = plan.objective if plan is not None and classify(plan.objective, inst) else None
    return inst.id, job.policy, obj, millis


def classify(objective: Optional[int], instance: Instance) -> bool:
    """Elimination rule: a plan longer than (8n - 11) d, or no plan at all, is a failure."""
    return objective is not None and objective <= elimination_bound(max(instance.m, instance.n), instance.d)


def run_jobs(jobs: list[_Job], n_jobs: int) -> list[tuple]:
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


def write_results(rows: list[tuple], path: Optional[str], timing: bool) -> None:
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for iid, policy, obj, millis in rows:
            w.writerow([iid, policy, "FAIL" if obj is None else obj, int(obj is not None),
                        f"{millis:.1f}" if timing else ""])
        ok = [r[2] for r in rows if r[2] is not None]
        mean = f"{np.mean(ok):.3f}" if ok else "FAIL"
        policies = ",".join(sorted({r[1] for r in rows}))
        ms = f"{np.mean([r[3] for r in rows]):.1f}" if timing and rows else ""
        w.writerow(["SUMMARY", policies, mean, f"{len(ok)}/{len(rows)}", ms])
    finally:
        if path:
            fh.close()


def cmd_solve(args) -> int:
    started = time.time()
    instances = sorted(_load(args.instances), key=lambda i: i.id)
    if args.policy == "rl" or (args.policy == "decomp" and args.sub_solver == "rl"):
        if not args.model or not Path(args.model).exists():
            raise InputError("the rl policy needs --model pointing at a checkpoint")
    if args.plans_dir:
        Path(args.plans_dir).mkdir(parents=True, exist_ok=True)
    jobs = [_Job(i, inst, args.policy, args.seed, args.model, args.sub_solver, args.runs, args.plans_dir)
            for i, inst in enumerate(instances)]
    rows = run_jobs(jobs, args.jobs)
    write_results(rows, args.out, args.timing)
    if args.out:
        inputs = [Path(args.instances)] + ([Path(args.model)] if args.model else [])
        write_manifest(Path(args.out), "solve", args, inputs, [Path(args.out)], started,
                       {"millis": {r[0]: round(r[3], 1) for r in rows}})
    if args.trace and len(instances) == 1 and args.plans_dir:
        _print_trace(instances[0], Plan.load(Path(args.plans_dir) / f"{instances[0].id}.{args.policy}.plan.json"))
    return EXIT_FAIL if any(r[2] is None for r in rows) else EXIT_OK


def _print_trace(instance: Instance, plan: Plan) -> None:
    states = replay(instance.state(), plan.moves)
    print(f"step 0\n{render_ascii(states[0])}")
    for k, (mv, st) in enumerate(zip(plan.moves, states[1:]), start=1):
        print(f"step {k}: escort {mv.escort_id} {list(mv.escort_from)} -> {list(mv.escort_to)}")
        print(render_ascii(st))


def cmd_show(args) -> int:
    inst = _load(args.instance)[0]
    if args.plan:
        try:
            _print_trace(inst, Plan.load(args.plan))
        except InvalidPlan as exc:
            raise InputError(f"{args.plan}: {exc}") from None
    else:
        print(render_ascii(inst.state()), end="")
    return EXIT_OK


# --- train -----------------------------------------------------------------

def cmd_train(args) -> int:
    from .rl.agent import TrainConfig, series_sampler, train, write_metrics

    started = time.time()
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.config}: {exc}") from None
    name = cfg.pop("series", args.series)
    for key in ("episodes", "seed"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    try:
        spec = series(name, 1)
        config = TrainConfig.from_json(cfg)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    every = max(1, args.log_every)

    def progress(rec, _net):
        if (rec.episode + 1) % every == 0:
            print(f"episode {rec.episode + 1} steps {rec.steps} loss {rec.loss:.5g} eps {rec.epsilon:.3f} "
                  f"eta {rec.eta:.3f} gamma {rec.gamma:.3f} solved {int(rec.solved)}", flush=True)

    agent, metrics = train(series_sampler(spec), config, progress)
    agent.meta["series"] = spec.name
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    agent.save(out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.csv")
    write_metrics(metrics, metrics_path)
    write_manifest(out, "train", args, [Path(args.config)] if args.config else [], [out, metrics_path], started)
    print(f"checkpoint {out}, metrics {metrics_path}")
    return EXIT_OK


# --- convert ---------------------------------------------------------------

def cmd_convert(args) -> int:
    started = time.time()
    try:
        plan = Plan.load(args.plan)
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{args.plan}: {exc}") from None
    initial = _load(args.instance)[0].state() if args.instance else None
    try:
        schedule = convert(plan, initial)
    except InvalidPlan as exc:
        raise InputError(f"invalid plan: {exc}") from None
    if initial is not None:
        _, verdict = replay_schedule(initial, schedule)
        if not verdict.ok:
            print(f"schedule check failed: {verdict.first}", file=sys.stderr)
            return EXIT_FAIL
    if args.out:
        schedule.save(args.out)
        write_manifest(Path(args.out), "convert", args, [Path(args.plan)], [Path(args.out)], started)
    print(f"makespan {schedule.makespan} moves {schedule.move_count}")
    return EXIT_OK


# --- decompose -------------------------------------------------------------

def cmd_decompose(args) -> int:
    started = time.time()
    inst = _load(args.instance)[0]
    agent = None
    if args.sub_solver == "rl":
        if not args.model:
            raise InputError("the rl sub-solver needs --model")
        agent = _agent(args.model)
    cfg = DecompConfig(window=(args.window, args.window), e_min=args.e_min, sub_solver=args.sub_solver,
                       max_iterations=args.max_iterations, seed=args.seed)
    try:
        res = decompose_best(inst, cfg, args.runs, make_sub_solver(args.sub_solver, agent))
    except SolveFailed as exc:
        print(f"{inst.id}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    bound = elimination_bound(max(inst.m, inst.n), inst.d)
    outputs = []
    if args.out:
        res.plan.save(args.out)
        outputs.append(Path(args.out))
    if args.trace:
        write_trace(res.trace, args.trace)
        outputs.append(Path(args.trace))
    if outputs:
        write_manifest(outputs[0], "decompose", args, [Path(args.instance)], outputs, started,
                       {"physical_moves": len(res.physical), "best_seed": res.seed})
    status = "ok" if res.objective <= bound else "FAIL"
    print(f"{inst.id}: objective {res.objective} ({status}, bound {bound}), physical moves {len(res.physical)}, "
          f"{len(res.trace)} windows")
    return EXIT_OK if status == "ok" else EXIT_FAIL


# --- export-lp -------------------------------------------------------------

def cmd_export_lp(args) -> int:
    started = time.time()
    inst = _load(args.instance)[0]
    K = args.K if args.K is not None else default_K(inst)
    text = export_lp(ModelSpec(inst, K, Mode(args.mode)))
    if args.out:
        Path(args.out).write_text(text)
        write_manifest(Path(args.out), "export-lp", args, [Path(args.instance)], [Path(args.out)], started,
                       {"K": K})
        print(f"wrote {args.out} (K={K})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- predict ---------------------------------------------------------------

def cmd_predict(args) -> int:
    started = time.time()
    if args.samples:
        try:
            samples = read_samples(args.samples)
            fit = ols_fit(samples)
        except (OSError, ValueError) as exc:
            raise InputError(f"{args.samples}: {exc}") from None
        print(f"alpha0 {fit.alpha0:.4f} alpha1 {fit.alpha1:.4f} alpha2 {fit.alpha2:.4f} "
              f"alpha3 {fit.alpha3:.4f} R2 {fit.r_squared:.4f}")
        if args.out:
            fit.save(args.out)
            write_manifest(Path(args.out), "predict", args, [Path(args.samples)], [Path(args.out)], started)
    else:
        fit = FitResult.load(args.fit) if args.fit else REFERENCE_FIT
    if args.query:
        total, e, n = args.query
        print(f"{predict(fit, total, int(e), int(n)):.2f}")
    return EXIT_OK


def cmd_samples(args) -> int:
    """Oracle objectives for instance files, written as regression samples."""
    started = time.time()
    instances = sorted(_load(args.instances), key=lambda i: i.id)
    jobs = [_Job(i, inst, "bfs", 0, None, "greedy", 1, None) for i, inst in enumerate(instances)]
    rows = run_jobs(jobs, args.jobs)
    kept = [(inst, r[2]) for inst, r in zip(instances, rows) if r[2] is not None]
    samples = samples_from_instances([k[0] for k in kept], [k[1] for k in kept])
    write_samples(samples, args.out)
    write_manifest(Path(args.out), "samples", args, [Path(args.instances)], [Path(args.out)], started)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


# --- bench -----------------------------------------------------------------

def cmd_bench(args) -> int:
    """Table of success counts, mean objectives and gaps to the exact optimum per series and policy."""
    started = time.time()
    table = []
    for name in args.series:
        try:
            instances = generate(series(name, args.count), args.seed)
        except (InfeasibleSpec, ValueError) as exc:
            raise InputError(str(exc)) from None
        results = {}
        for policy in args.policies:
            if policy in ("rl",) and not args.model:
                raise InputError("bench with rl needs --model")
            jobs = [_Job(i, inst, policy, args.seed, args.model, args.sub_solver, args.runs, None)
                    for i, inst in enumerate(instances)]
            results[policy] = run_jobs(jobs, args.jobs)
        opt = {r[0]: r[2] for r in results.get("bfs", [])}
        for policy, rows in results.items():
            ok = [r for r in rows if r[2] is not None]
            gaps = [(r[2] - opt[r[0]]) / r[2] for r in ok if opt.get(r[0]) is not None and r[2] > 0]
            table.append([name, policy, len(rows), len(ok),
                          f"{np.mean([r[2] for r in ok]):.3f}" if ok else "",
                          f"{100 * np.mean(gaps):.3f}" if gaps else ""])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["series", "policy", "total", "success", "mean_objective", "mean_gap_pct"])
        w.writerows(table)
    finally:
        if args.out:
            fh.close()
    if args.out:
        write_manifest(Path(args.out), "bench", args, [Path(args.model)] if args.model else [], [Path(args.out)],
                       started)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pbslab", description="Retrieval planning for puzzle-based storage grids.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a benchmark series (one JSON file per instance)")
    p.add_argument("series", help="series id: R422, F611, F621, R-6x37-1-22, ...")
    p.add_argument("--count", type=int, help="instances to draw (F611 is always exhaustive)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve instances with one policy; CSV columns: " + ", ".join(RESULT_FIELDS))
    p.add_argument("instances", help="instance file, series array file or directory")
    p.add_argument("--policy", choices=POLICIES, default="bfs")
    p.add_argument("--model", help="checkpoint for rl (and decomp with --sub-solver rl)")
    p.add_argument("--sub-solver", choices=("greedy", "oracle", "rl"), default="greedy")
    p.add_argument("--runs", type=int, default=3, help="decomposition runs per instance (best is kept)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="results CSV (stdout if omitted)")
    p.add_argument("--plans-dir", help="also save each plan as JSON here")
    p.add_argument("--timing", action="store_true", help="fill the millis column (breaks byte-identical reruns)")
    p.add_argument("--trace", action="store_true", help="print an ASCII trace (single instance with --plans-dir)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("show", help="render an instance, or replay a plan step by step")
    p.add_argument("instance")
    p.add_argument("--plan")
    p.set_defaults(func=cmd_show)

    p = sub.add_parser("train", help="train a dueling double DQN policy")
    p.add_argument("--config", help="JSON with TrainConfig fields and optional 'series'")
    p.add_argument("--series", default="R422")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="checkpoint path (JSON)")
    p.add_argument("--metrics", help="metrics CSV (default: next to the checkpoint)")
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", help="group a single-load plan into simultaneous timestamps")
    p.add_argument("plan")
    p.add_argument("--instance", help="replay the plan and the schedule against this instance")
    p.add_argument("--out", help="schedule JSON")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("decompose", help="solve one (large) instance with the sliding-window framework")
    p.add_argument("instance")
    p.add_argument("--sub-solver", choices=("greedy", "oracle", "rl"), default="greedy")
    p.add_argument("--model")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--e-min", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="plan JSON")
    p.add_argument("--trace", help="per-window trace CSV")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("export-lp", help="write the integer program as CPLEX-LP text")
    p.add_argument("instance")
    p.add_argument("--K", type=int, help="maximum moves (default: regression estimate + 25%%)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="single")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("predict", help="fit the workload regression or evaluate it")
    p.add_argument("--samples", help="CSV with sum_item_manhattan,e,n,moves to fit")
    p.add_argument("--fit", help="fit JSON to evaluate (default: reference coefficients)")
    p.add_argument("--query", nargs=3, type=float, metavar=("SUM_D", "E", "N"))
    p.add_argument("--out", help="write the fitted coefficients here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("samples", help="oracle objectives of instances as regression samples")
    p.add_argument("instances")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_samples)

    p = sub.add_parser("bench", help="compare policies on generated series")
    p.add_argument("--series", nargs="+", default=["R422"])
    p.add_argument("--policies", nargs="+", choices=POLICIES, default=["bfs", "guided"])
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--model")
    p.add_argument("--sub-solver", choices=("greedy", "oracle", "rl"), default="greedy")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
