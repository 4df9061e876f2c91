"""Command-line interface.

Subcommands: run, sweep, analytics-count, distribution, predict, report,
kernel-bench. Configuration comes from an optional JSON file (mirroring
WorkloadSpec) plus flag overrides.
"""

import argparse
import json
import os
import sys
import time

from .workload import MIB, WorkloadSpec, load_workload


def _add_workload_flags(p):
    p.add_argument("--config", help="JSON workload config (unknown keys rejected)")
    p.add_argument("--pattern", choices=["p", "c", "m", "all"], help="pattern(s) to run")
    p.add_argument("--steps", type=int)
    p.add_argument("--size-mb", type=float, help="payload size per step in MiB")
    p.add_argument("--qualified-pct", type=float,
                   help="qualified percentage, 0-100 (values <= 1 read as a fraction)")
    p.add_argument("--distribution", help="even | block:<a>-<b>")
    p.add_argument("--instances", type=int)
    p.add_argument("--pool", type=int)
    p.add_argument("--pool-mode", choices=["queueing", "slowdown"])
    p.add_argument("--slowdown", type=float, help="oversubscription slowdown factor")
    p.add_argument("--preset", choices=["a", "b"])
    p.add_argument("--mode", choices=["live", "predict", "both"], default="live")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)


def _workload_from_args(args):
    workload = load_workload(args.config) if args.config else WorkloadSpec()
    over = {}
    if args.pattern:
        over["patterns"] = ("P", "C", "M") if args.pattern == "all" else (args.pattern.upper(),)
    if args.steps is not None:
        over["steps"] = args.steps
    if args.size_mb is not None:
        over["payload_bytes"] = int(args.size_mb * MIB)
    if args.qualified_pct is not None:
        pct = args.qualified_pct
        over["qualified_pct"] = pct / 100.0 if pct > 1.0 else pct
    if args.distribution:
        over["distribution"] = args.distribution
    if args.instances is not None:
        over["instances"] = args.instances
    if args.pool is not None:
        over["pool"] = args.pool
    if getattr(args, "pool_mode", None):
        over["pool_mode"] = args.pool_mode
    if getattr(args, "slowdown", None) is not None:
        over["oversubscription_slowdown"] = args.slowdown
    if args.preset:
        over["preset"] = args.preset
    if args.seed is not None:
        over["seed"] = args.seed
    if args.reps is not None:
        over["repetitions"] = args.reps
    return workload.replace(**over) if over else workload


def _report_line(report):
    return (f"{report.pattern}: makespan {report.makespan_ms:.1f} ms, "
            f"bytes {report.bytes_transferred}, "
            f"analyses {report.analyses_completed}")


def cmd_run(args):
    from .costmodel import predict
    from .orchestrator import run_pattern

    workload = _workload_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    for pattern in workload.patterns:
        if args.mode in ("live", "both"):
            report = run_pattern(workload, pattern)
            print("live    " + _report_line(report))
            path = os.path.join(args.out, f"{report.run_id}.csv")
            with open(path, "w", encoding="utf-8") as f:
                f.write(report.to_csv())
        if args.mode in ("predict", "both"):
            report = predict(workload, pattern)
            print("predict " + _report_line(report))
            path = os.path.join(args.out, f"{report.run_id}.csv")
            with open(path, "w", encoding="utf-8") as f:
                f.write(report.to_csv())
    return 0


def cmd_predict(args):
    args.mode = "predict"
    return cmd_run(args)


def cmd_sweep(args):
    from .harness import emit_report, run_sweep

    workload = _workload_from_args(args)
    sizes = args.sizes or "8,16,32,64,128"
    qs = args.qualified or "0,20,40,60,80,100"
    sizes_mib = [float(s) for s in sizes.split(",")]
    pcts = [float(q) / 100.0 for q in qs.split(",")]
    mode = "predict" if args.mode == "predict" else "live"
    grid = run_sweep(workload, pcts, sizes_mib, mode=mode,
                     parallel_cells=args.parallel_cells)
    for fmt in ("csv", "svg-heatmap", "text-table"):
        for path in emit_report(grid, fmt, args.out, stem=f"sweep_{workload.preset}"):
            print("wrote", path)
    return 0


def cmd_analytics_count(args):
    from .harness import run_analytics_count_experiment

    workload = _workload_from_args(args)
    k_values = [int(k) for k in (args.k_values or "1,2,3,5,7").split(",")]
    mode = "predict" if args.mode == "predict" else "live"
    series = run_analytics_count_experiment(workload, k_values, mode=mode)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "analytics_count.csv")
    with open(path, "w", encoding="utf-8") as f:
        f.write("instances,pattern,makespan_ms\n")
        for k in k_values:
            for pattern, mean in sorted(series[k].items()):
                f.write(f"{k},{pattern},{mean!r}\n")
                print(f"k={k} {pattern}: {mean:.1f} ms")
    print("wrote", path)
    return 0


def cmd_distribution(args):
    from .harness import run_distribution_experiment

    workload = _workload_from_args(args)
    mode = "predict" if args.mode == "predict" else "live"
    blocks = []
    for spec in (args.blocks or "1-5,6-10,11-15,16-20,21-25").split(","):
        a, b = spec.split("-")
        blocks.append((int(a), int(b)))
    series = run_distribution_experiment(workload, blocks, mode=mode)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "distribution.csv")
    with open(path, "w", encoding="utf-8") as f:
        f.write("block,pattern,makespan_ms\n")
        for block in blocks:
            for pattern, mean in sorted(series[tuple(block)].items()):
                f.write(f"{block[0]}-{block[1]},{pattern},{mean!r}\n")
                print(f"block {block[0]}-{block[1]} {pattern}: {mean:.1f} ms")
    print("wrote", path)
    return 0


def cmd_report(args):
    from .harness import emit_report, grid_from_csv, table_one_analog, table_one_text

    if args.grid_csv:
        with open(args.grid_csv, "r", encoding="utf-8") as f:
            grid = grid_from_csv(f.read())
        for fmt in ("svg-heatmap", "text-table"):
            for path in emit_report(grid, fmt, args.out):
                print("wrote", path)
    rows = table_one_analog()
    text = table_one_text(rows)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "recommendation.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    print(text, end="")
    print("wrote", path)
    return 0


def cmd_kernel_bench(args):
    import numpy as np

    os.environ.setdefault("TRIGGERBENCH_KERNELS", "numba")
    results = {}
    for backend in ("numba", "numpy"):
        os.environ["TRIGGERBENCH_KERNELS"] = backend
        for mod in list(sys.modules):
            if mod.startswith("triggerbench._kernels"):
                del sys.modules[mod]
        from triggerbench import _kernels

        if _kernels.BACKEND != backend:
            print(f"{backend}: unavailable, skipped")
            continue
        n = args.grid
        u = np.ones((n, n, n))
        v = np.zeros((n, n, n))
        v[n // 2 - 2:n // 2 + 2] = 0.5
        ou, ov = np.empty_like(u), np.empty_like(v)
        words = np.empty(args.mib * MIB // 8, dtype=np.uint64)
        values = np.random.default_rng(0).random(n * n * n)
        timings = {}

        def bench(name, fn, repeat=args.repeat):
            fn()  # warm-up / jit
            best = min(_timed(fn) for _ in range(repeat))
            timings[name] = best

        bench(f"gray_scott_step {n}^3",
              lambda: _kernels.gray_scott_step(u, v, ou, ov, 0.2, 0.1, 0.02, 0.048, 2.0))
        bench(f"histogram {n}^3x100",
              lambda: _kernels.histogram_counts(values, 0.0, 1.0, 100))
        bench(f"payload fill {args.mib}MiB",
              lambda: _kernels.fill_words(words, np.uint64(7)))
        bench("spin 1e6 iters",
              lambda: _kernels.spin_chunk(1_000_000))
        results[backend] = timings
    names = sorted({k for t in results.values() for k in t})
    print(f"{'kernel':<28}" + "".join(f"{b + ' (ms)':>14}" for b in results)
          + ("    speedup" if len(results) == 2 else ""))
    for name in names:
        row = f"{name:<28}"
        vals = []
        for backend in results:
            ms = results[backend].get(name)
            vals.append(ms)
            row += f"{ms * 1e3:>14.3f}" if ms is not None else f"{'-':>14}"
        if len(vals) == 2 and all(vals):
            row += f"{vals[1] / vals[0]:>10.1f}x"
        print(row)
    return 0


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="triggerbench",
        description="Benchmark dynamic task-trigger patterns (producer-, "
                    "consumer-, middleware-responsible) at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one workload (live and/or predicted)")
    _add_workload_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_pred = sub.add_parser("predict", help="cost-model prediction only")
    _add_workload_flags(p_pred)
    p_pred.set_defaults(fn=cmd_predict)

    p_sweep = sub.add_parser("sweep", help="qualified-%% x size grid")
    _add_workload_flags(p_sweep)
    p_sweep.add_argument("--sizes", help="comma-separated MiB values")
    p_sweep.add_argument("--qualified", help="comma-separated percentages")
    p_sweep.add_argument("--parallel-cells", action="store_true",
                         help="run cells concurrently (predict mode only)")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_k = sub.add_parser("analytics-count", help="vary triggered analytics per step")
    _add_workload_flags(p_k)
    p_k.add_argument("--k-values", help="comma-separated instance counts")
    p_k.set_defaults(fn=cmd_analytics_count)

    p_d = sub.add_parser("distribution", help="vary qualified-data placement")
    _add_workload_flags(p_d)
    p_d.add_argument("--blocks", help="comma-separated a-b blocks")
    p_d.set_defaults(fn=cmd_distribution)

    p_rep = sub.add_parser("report", help="render reports from a grid CSV")
    p_rep.add_argument("--grid-csv", help="grid CSV produced by sweep")
    p_rep.add_argument("--out", default="out")
    p_rep.set_defaults(fn=cmd_report)

    p_kb = sub.add_parser("kernel-bench", help="compare numba and numpy kernels")
    p_kb.add_argument("--grid", type=int, default=64, help="stencil grid edge")
    p_kb.add_argument("--mib", type=int, default=32, help="payload fill size")
    p_kb.add_argument("--repeat", type=int, default=5)
    p_kb.set_defaults(fn=cmd_kernel_bench)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
