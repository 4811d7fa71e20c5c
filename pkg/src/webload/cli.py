"""``webload`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import analytic, analyzer, planner, ruler, simulator
from .core import ThinkDistribution, WebloadError, WorkloadPoint, summarize_gaps
from .mix import load_mix, webgov_mix

log = logging.getLogger("webload")

ENV_OUTPUT_DIR = "WEBLOAD_OUTPUT_DIR"
ENV_FORMAT = "WEBLOAD_FORMAT"


# ---------------------------------------------------------------- arg types

def _number(kind, test, what):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a valid number")
        if not test(value):
            raise argparse.ArgumentTypeError(f"{text!r}: must be {what}")
        return value
    return parse


pos_float = _number(float, lambda v: v > 0, "> 0")
nonneg_float = _number(float, lambda v: v >= 0, ">= 0")
pos_int = _number(int, lambda v: v >= 1, ">= 1")
fraction = _number(float, lambda v: 0 <= v <= 1, "in [0, 1]")


def _latency(text: str) -> tuple[str, float]:
    name, sep, ms = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"{text!r}: expected NAME=MILLISECONDS")
    return name, nonneg_float(ms)


# ---------------------------------------------------------------- output

class Output:
    def __init__(self, args):
        self.fmt = args.format
        self.dir = Path(args.output_dir) if args.output_dir else None

    def emit(self, name: str, text: str) -> None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / name).write_text(text if text.endswith("\n") else text + "\n")

    def table(self, name: str, header: list[str], rows: list[list], records: list[dict] | dict) -> None:
        if self.fmt == "json":
            self.emit(f"{name}.json", json.dumps(records, indent=2, sort_keys=True))
        else:
            lines = [",".join(header)] + [",".join(str(c) for c in r) for r in rows]
            self.emit(f"{name}.csv", "\n".join(lines))


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        log.warning("no --seed given; using generated seed %d", args.seed)
    return args.seed


def _f(x: float, places: int = 4) -> str:
    return f"{x:.{places}f}"


# ---------------------------------------------------------------- commands

def cmd_solve(args, out: Output) -> None:
    m = analytic.solve_closed(analytic.ClosedModel(args.service, WorkloadPoint(args.n, args.z)))
    b = analytic.bounds(args.service, args.n, args.z) if args.z > 0 else None
    header = ["N", "Z", "lambda", "R", "Q", "Q/Z", "lambda_rat", "lambda_sat"]
    row = [args.n, _f(args.z), _f(m.arrival_rate), _f(m.residence_time), _f(m.concurrency),
           _f(m.concurrency / args.z) if args.z > 0 else "inf",
           _f(b.lambda_rat) if b else "inf", _f(1.0 / args.service)]
    out.table("solve", header, [row], asdict(m))


def cmd_sweep(args, out: Output) -> None:
    if (args.z is None) == (args.lambda_rat is None):
        raise argparse.ArgumentTypeError("give exactly one of --z (fixed think time) or --lambda-rat (scaled think time)")
    if args.z is not None:
        points = [WorkloadPoint(n, args.z) for n in args.n]
    else:
        points = [WorkloadPoint(n, n / args.lambda_rat) for n in args.n]
    res = analytic.sweep(args.service, points)
    if out.fmt == "json":
        recs = [{"N": wp.n_generators, "Z": wp.think_time_mean, **asdict(m)} for wp, m in res.points]
        out.emit("sweep.json", json.dumps(recs, indent=2, sort_keys=True))
    else:
        out.emit("sweep.csv", res.to_csv())


def cmd_simulate(args, out: Output) -> None:
    seed = _seed(args)
    cfg = simulator.SimConfig(
        workload=WorkloadPoint(args.n, args.z, ThinkDistribution(args.think)),
        service_time_mean=args.service, horizon=args.horizon, seed=seed,
        service_distribution=args.service_dist, mode=args.mode,
        open_arrival_rate=args.rate or 0.0, trim_head_fraction=args.trim_fraction,
    )
    res = simulator.simulate(cfg)
    gaps = summarize_gaps(res.gaps() * 1000.0)
    m = res.measured
    header = ["mode", "N", "Z", "lambda", "X", "R", "Q", "gap_mean_ms", "gap_sd_ms", "CoV", "arrivals"]
    row = [cfg.mode.value, args.n, _f(args.z), _f(m.arrival_rate), _f(m.throughput), _f(m.residence_time),
           _f(m.concurrency), _f(gaps.mean), _f(gaps.std_dev), _f(gaps.cov), res.window.arrival_count]
    out.table("simulate", header, [row], {"metrics": asdict(m), "interarrival_ms": asdict(gaps),
                                          "window": asdict(res.window), "seed": seed})
    if args.log:
        res.log.write_csv(args.log)


def cmd_plan(args, out: Output) -> None:
    trims = (args.trim_head, args.trim_tail)
    if args.lambda_rat is not None:
        if args.z_ms:
            raise argparse.ArgumentTypeError("--lambda-rat and --z-ms are mutually exclusive")
        plan = planner.plan_scaled_z(args.lambda_rat, args.n, args.duration, trims, args.think,
                                     target_mix=args.mix, schedule_start=args.schedule_start)
    else:
        if not args.z_ms or len(args.n) != 1:
            raise argparse.ArgumentTypeError("fixed-N plans need a single --n and one or more --z-ms values")
        plan = planner.plan_fixed_n(args.n[0], [z / 1000.0 for z in args.z_ms], args.duration, trims,
                                    args.think, target_mix=args.mix, schedule_start=args.schedule_start)
    text = planner.plan_to_json(plan).rstrip("\n")
    if args.out:
        Path(args.out).write_text(text + "\n")
    out.emit("plan.json", text)


def cmd_validate(args, out: Output) -> None:
    plan = planner.load_plan(args.plan)
    warnings = planner.validate_plan(plan, args.s_max, args.q_ratio)
    if out.fmt == "json":
        out.emit("validate.json", json.dumps([asdict(w) for w in warnings], indent=2))
    else:
        out.emit("validate.txt", "\n".join(str(w) for w in warnings) if warnings else "ok: no warnings")


def cmd_generate(args, out: Output) -> None:
    from . import loadgen

    seed = _seed(args)
    plan = planner.load_plan(args.plan)
    mix = load_mix(args.mix) if args.mix else webgov_mix()
    paths = loadgen.run_test(plan, mix, args.base_url, seed, args.out_dir,
                             failure_ceiling=args.failure_ceiling, thread_cap=args.thread_cap)
    out.emit("generate.txt", "\n".join(str(p) for p in paths))


def cmd_serve(args, out: Output) -> None:
    from .server import serve_target

    latencies = dict(args.latency or [])
    if args.mix:
        for e in load_mix(args.mix).entries:
            latencies.setdefault(e.path.lstrip("/"), args.default_latency)
    if not latencies:
        latencies = {e.path.lstrip("/"): args.default_latency for e in webgov_mix().entries}
    srv = serve_target(latencies, args.port, args.host)
    print(f"serving {len(latencies)} objects on {srv.url} (Ctrl-C to stop)", flush=True)
    try:
        deadline = None if args.duration is None else time.monotonic() + args.duration
        while deadline is None or time.monotonic() < deadline:
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        srv.stop()
    out.emit("serve.json", json.dumps(srv.counts(), sort_keys=True))


def cmd_analyze(args, out: Output) -> None:
    if len(args.z) not in (1, len(args.log)):
        raise argparse.ArgumentTypeError("give one --z for all logs or one per log")
    results = []
    for i, path in enumerate(args.log):
        ing = analyzer.ingest(path, args.trim_head, args.trim_tail)
        z = args.z[i] if len(args.z) > 1 else args.z[0]
        results.append(analyzer.derive_metrics(ing.log, ing.window, z, percentile=args.percentile))
    band = (args.band_low, args.band_high)
    if out.fmt == "json":
        docs = []
        for a in results:
            d = a.to_dict()
            d["verdict"] = analyzer.cov_verdict(a.interarrival, band)
            docs.append(d)
        out.emit("analyze.json", json.dumps(docs, indent=2, sort_keys=True))
    else:
        out.emit("analyze.csv", analyzer.table3_csv(results))
    for a in results:
        log.info("%s: CoV %.3f -> %s", a.run_label, a.interarrival.cov, analyzer.cov_verdict(a.interarrival, band))


def _read_runs(path: str) -> list[tuple[str, float, float]]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [(r["Run"], float(r["lambda(obj/s)"]), float(r["R(ms)"])) for r in reader]


def cmd_internet(args, out: Output) -> None:
    runs = [(label, pos_float(lam), nonneg_float(r)) for label, lam, r in (args.run or [])]
    if args.table:
        runs += _read_runs(args.table)
    if not runs:
        raise argparse.ArgumentTypeError("nothing to estimate: give --run LABEL LAMBDA R or --table FILE")
    mix = load_mix(args.mix) if args.mix else webgov_mix()
    rows = analyzer.internet_matrix(runs, mix, args.z_prime)
    if out.fmt == "json":
        out.emit("internet.json", json.dumps([asdict(r) for r in rows], indent=2, sort_keys=True))
    else:
        out.emit("internet.csv", analyzer.internet_matrix_csv(rows, args.z_prime))


def cmd_ruler(args, out: Output) -> None:
    seed = _seed(args)
    res = ruler.ruler_experiment(args.marks, args.ruler_mm, args.bin_mm, seed,
                                 None if args.continuous else args.resolution_mm)
    if out.fmt == "json":
        doc = {
            "count_mean": res.count_mean, "count_variance": res.count_variance,
            "count_frequencies": res.count_frequencies.tolist(),
            "poisson_pmf": res.theoretical_poisson.tolist(), "gaps": asdict(res.gap_stats), "seed": seed,
        }
        out.emit("ruler.json", json.dumps(doc, indent=2, sort_keys=True))
    else:
        out.emit("ruler.csv", ruler.histogram_csv(res))
    if args.chart:
        print(ruler.bar_chart(res), file=sys.stderr)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (randomised commands)")
    common.add_argument("--output-dir", default=os.environ.get(ENV_OUTPUT_DIR),
                        help=f"also write tables here (env {ENV_OUTPUT_DIR})")
    common.add_argument("--format", choices=("csv", "json"), default=os.environ.get(ENV_FORMAT, "csv"),
                        help=f"table format (env {ENV_FORMAT})")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="webload", description=(
        "Emulate open (web) traffic with a closed load-test rig: scale think time with the number "
        "of generators (Principle A) and check the inter-arrival CoV is near 1 (Principle B)."
    ))
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("solve", cmd_solve, "Solve the closed repairman queue for one (N, Z) point "
             "(Table 1 metrics; Principle A bounds lambda_rat = N/Z <= lambda_sat = 1/S).")
    sp.add_argument("--service", type=pos_float, required=True, help="SUT service demand S (s)")
    sp.add_argument("--n", type=pos_int, required=True, help="number of generators N")
    sp.add_argument("--z", type=nonneg_float, required=True, help="mean think time Z (s)")

    sp = add("sweep", cmd_sweep, "Sweep N with fixed Z (Table 1a) or Z scaled to hold N/Z constant "
             "(Table 1b, Principle A, Fig. 5).")
    sp.add_argument("--service", type=pos_float, required=True)
    sp.add_argument("--n", type=pos_int, nargs="+", required=True)
    sp.add_argument("--z", type=pos_float, help="fixed think time (s)")
    sp.add_argument("--lambda-rat", type=pos_float, help="hold N/Z at this rate (req/s)")

    sp = add("simulate", cmd_simulate, "Discrete-event simulation of the closed or open queue; reports "
             "time-averaged metrics and the inter-arrival CoV (Principle B, Figs. 3-4).")
    sp.add_argument("--mode", choices=("closed", "open"), default="closed")
    sp.add_argument("--n", type=pos_int, default=1)
    sp.add_argument("--z", type=nonneg_float, default=0.0)
    sp.add_argument("--think", choices=[d.value for d in ThinkDistribution], default="exponential")
    sp.add_argument("--service", type=pos_float, required=True)
    sp.add_argument("--service-dist", choices=("exponential", "constant"), default="exponential")
    sp.add_argument("--rate", type=pos_float, help="open-mode arrival rate (req/s)")
    sp.add_argument("--horizon", type=pos_float, required=True, help="simulated seconds")
    sp.add_argument("--trim-fraction", type=fraction, default=0.05)
    sp.add_argument("--log", help="write the arrival log CSV here")

    sp = add("plan", cmd_plan, "Build a test plan: constant N/Z (Principle A, Table 1b) or fixed N with "
             "decreasing Z (the Table 3 schedule).")
    sp.add_argument("--n", type=pos_int, nargs="+", required=True)
    sp.add_argument("--lambda-rat", type=pos_float)
    sp.add_argument("--z-ms", type=pos_float, nargs="+")
    sp.add_argument("--duration", type=pos_float, required=True, help="run duration (s)")
    sp.add_argument("--trim-head", type=nonneg_float, default=0.0)
    sp.add_argument("--trim-tail", type=nonneg_float, default=0.0)
    sp.add_argument("--think", choices=[d.value for d in ThinkDistribution], default="uniform")
    sp.add_argument("--schedule-start", help="HH:MM; labels runs by 24-hour start time")
    sp.add_argument("--mix", help="mix file the plan targets")
    sp.add_argument("--out", help="write the plan JSON here")

    sp = add("validate", cmd_validate, "Check a plan against lambda_rat <= lambda_sat and Q << N (Principle A).")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--s-max", type=pos_float, required=True)
    sp.add_argument("--q-ratio", type=pos_float, default=planner.DEFAULT_Q_RATIO_THRESHOLD)

    sp = add("generate", cmd_generate, "Drive real HTTP load from a plan (virtual users with think time, "
             "weighted object mix as in the Fig. 7 script).")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--mix")
    sp.add_argument("--base-url", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--failure-ceiling", type=fraction, default=0.10)
    sp.add_argument("--thread-cap", type=pos_int, default=64)

    sp = add("serve", cmd_serve, "Run the bundled target web server with fixed per-object latency "
             "(desk-scale SUT for Principle B checks).")
    sp.add_argument("--latency", type=_latency, action="append", help="NAME=MS, repeatable")
    sp.add_argument("--mix", help="serve every object of this mix")
    sp.add_argument("--default-latency", type=nonneg_float, default=50.0)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=_number(int, lambda v: 0 <= v < 65536, "a port number"), default=8080)
    sp.add_argument("--duration", type=pos_float, help="stop after this many seconds")

    sp = add("analyze", cmd_analyze, "Analyse request logs: inter-arrival CoV (Principle B) and the "
             "Little's-law columns of Table 3.")
    sp.add_argument("--log", nargs="+", required=True)
    sp.add_argument("--trim-head", type=nonneg_float, default=0.0, help="seconds dropped at the start")
    sp.add_argument("--trim-tail", type=nonneg_float, default=0.0, help="seconds dropped at the end")
    sp.add_argument("--z", type=nonneg_float, nargs="+", required=True, help="mean think time(s) in ms")
    sp.add_argument("--percentile", type=_number(float, lambda v: 0 < v < 100, "in (0, 100)"), default=95.0)
    sp.add_argument("--band-low", type=nonneg_float, default=analyzer.DEFAULT_BAND[0])
    sp.add_argument("--band-high", type=nonneg_float, default=analyzer.DEFAULT_BAND[1])

    sp = add("internet", cmd_internet, "Estimate Internet web users N' = lambda (R + Z') after object-to-page "
             "conversion (Table 4).")
    sp.add_argument("--run", nargs=3, action="append", metavar=("LABEL", "LAMBDA_OBJ", "R_MS"))
    sp.add_argument("--table", help="CSV from `analyze` to read runs from")
    sp.add_argument("--mix", help="mix file (default: the six-object 9:15 case-study mix)")
    sp.add_argument("--z-prime", type=nonneg_float, nargs="+", default=list(analyzer.DEFAULT_Z_PRIMES),
                    help="nominal Internet think times (ms)")

    sp = add("ruler", cmd_ruler, "Meter-ruler demonstration of random arrivals: Poisson counts per bin "
             "and exponential gaps (Appendix A).")
    sp.add_argument("--marks", type=_number(int, lambda v: v >= 2, ">= 2"), default=200)
    sp.add_argument("--ruler-mm", type=pos_float, default=1000.0)
    sp.add_argument("--bin-mm", type=pos_float, default=10.0)
    sp.add_argument("--resolution-mm", type=pos_float, default=1.0)
    sp.add_argument("--continuous", action="store_true", help="do not round mark positions")
    sp.add_argument("--chart", action="store_true", help="draw the histogram on stderr")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, Output(args))
    except argparse.ArgumentTypeError as exc:
        print(f"webload {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (WebloadError, OSError, ValueError) as exc:
        print(f"webload {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
