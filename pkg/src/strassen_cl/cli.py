"""Command-line harness.

Commands: ``train``, ``batch``, ``verify``, ``transform``, ``fixture``.
Run ``strassen-cl <command> --help`` for flags.

Exit codes:
    train      0 converged, 2 not converged, 1 usage/input error
    batch      0 finished, 1 usage/input error
    verify     0 epsilon below threshold, 2 above, 1 unreadable file
    transform  0 written, 1 usage/input error
    fixture    0 written, 1 IO error
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cl_update import UpdateMode
from .errors import StrassenCLError
from .network import strassen_fixture
from .tensor_core import (
    build_matmul_tensor,
    decomposition_error,
    load_weights,
    save_weights,
    transform_decomposition,
)
from .trainer import (
    Classification,
    Outcome,
    RunConfig,
    RunTrace,
    TraceSample,
    max_weight_magnitude,
    run_training,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2

HIST_LOW_EXP = -16
HIST_HIGH_EXP = 1
TRANSFORM_COND_LIMIT = 1e3
FULL_PRESET = {"n": 3, "rank": 23, "runs": 1000, "max_items": 10**8}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- trace / summary files -----------------------------------------------------


def write_trace(trace: RunTrace, path) -> None:
    """One JSON object per line: items_seen, epsilon, max_weight, skipped_count."""
    with open(path, "w") as fh:
        for s in trace.samples:
            fh.write(json.dumps(s._asdict()) + "\n")


def read_trace(path) -> list[TraceSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                samples.append(TraceSample(**json.loads(line)))
    return samples


@dataclass
class BatchRow:
    run_id: int
    seed: int
    final_epsilon: float
    items_used: int
    classification: str
    max_weight: float
    weight_growth_factor: float


@dataclass
class BatchSummary:
    rows: list[BatchRow]
    histogram: list[tuple[float, float, int]] = field(default_factory=list)

    @property
    def runs(self) -> int:
        return len(self.rows)

    @property
    def converged_count(self) -> int:
        return sum(r.classification == Classification.CONVERGED.value for r in self.rows)

    @property
    def converged_fraction(self) -> float:
        return self.converged_count / self.runs if self.runs else 0.0


def epsilon_histogram(values, low_exp=HIST_LOW_EXP, high_exp=HIST_HIGH_EXP):
    """Counts per decade on [10^low_exp, 10^high_exp]; values outside go to the end bins."""
    edges = 10.0 ** np.arange(low_exp, high_exp + 1)
    counts = np.zeros(len(edges) - 1, dtype=int)
    for v in values:
        if v <= 0 or not math.isfinite(v):
            idx = 0 if v <= 0 else len(counts) - 1
        else:
            idx = int(np.clip(math.floor(math.log10(v)) - low_exp, 0, len(counts) - 1))
        counts[idx] += 1
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))]


def summarize(traces: list[RunTrace]) -> BatchSummary:
    rows = [
        BatchRow(
            run_id=i,
            seed=t.config.seed,
            final_epsilon=t.final_epsilon,
            items_used=t.items_used,
            classification=t.classification.value,
            max_weight=t.samples[-1].max_weight,
            weight_growth_factor=t.weight_growth_factor,
        )
        for i, t in enumerate(traces)
    ]
    return BatchSummary(rows, epsilon_histogram([r.final_epsilon for r in rows]))


SUMMARY_FIELDS = [
    "run_id",
    "seed",
    "final_epsilon",
    "items_used",
    "classification",
    "max_weight",
    "weight_growth_factor",
    "runs",
    "converged_count",
    "converged_fraction",
]


def write_summary(summary: BatchSummary, path) -> None:
    """Per-run rows, then one row with run_id ``aggregate`` carrying the totals."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in summary.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in vars(row).items()})
        writer.writerow(
            {
                "run_id": "aggregate",
                "runs": summary.runs,
                "converged_count": summary.converged_count,
                "converged_fraction": repr(summary.converged_fraction),
            }
        )


def write_histogram(summary: BatchSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for low, high, count in summary.histogram:
            writer.writerow([repr(low), repr(high), count])


def run_batch(base: RunConfig, runs: int, master_seed: int, jobs: int = 1):
    """Run ``runs`` independent trainings; run i uses seed ``master_seed + i``."""
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    configs = [
        RunConfig(
            base.n,
            base.r,
            master_seed + i,
            base.max_items,
            base.eps_target,
            base.eval_every,
            base.init_scale,
            base.mode,
        )
        for i in range(runs)
    ]
    if jobs <= 1:
        return [run_training(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_training, configs))


# -- commands --------------------------------------------------------------------


def _add_run_flags(p, required=True):
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--rank", type=int, required=required)
    p.add_argument("--max-items", type=_int_like, required=required)
    p.add_argument("--eps-target", type=float, default=1e-14)
    p.add_argument("--eval-every", type=int, default=1000)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--mode", choices=[m.value for m in UpdateMode], default="cg1")


def _int_like(text):
    """Accept 100000 as well as 1e5."""
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"not an integer: {text}")
        return int(value)


def _config(args, seed) -> RunConfig:
    return RunConfig(
        n=args.n,
        r=args.rank,
        seed=seed,
        max_items=args.max_items,
        eps_target=args.eps_target,
        eval_every=args.eval_every,
        init_scale=args.init_scale,
        mode=UpdateMode(args.mode),
    )


def cmd_train(args) -> int:
    cfg = _config(args, args.seed)
    init = load_weights(args.init_weights) if args.init_weights else None
    weights, trace = run_training(cfg, initial_weights=init)
    write_trace(trace, args.trace)
    if args.weights_out:
        save_weights(weights, args.weights_out)
    print(f"final_epsilon {trace.final_epsilon!r}")
    print(f"items_used {trace.items_used}")
    print(f"max_weight {trace.samples[-1].max_weight!r}")
    print(f"weight_growth_factor {trace.weight_growth_factor!r}")
    print(f"skipped {trace.skipped_count}")
    print(f"classification {trace.classification.value}")
    return EXIT_OK if trace.outcome is Outcome.CONVERGED else EXIT_NOT_CONVERGED


def cmd_batch(args) -> int:
    if args.full:
        args.n, args.rank = FULL_PRESET["n"], FULL_PRESET["rank"]
        args.runs, args.max_items = FULL_PRESET["runs"], FULL_PRESET["max_items"]
    if args.n is None or args.rank is None or args.max_items is None:
        raise UsageError("batch: --n, --rank and --max-items are required unless --full is given")
    if args.runs < 1:
        raise UsageError("batch: --runs must be >= 1")
    base = _config(args, args.master_seed)
    traces = [t for _, t in run_batch(base, args.runs, args.master_seed, args.jobs)]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.traces:
        for i, t in enumerate(traces):
            write_trace(t, out / f"trace_run{i:04d}.jsonl")
    summary = summarize(traces)
    write_summary(summary, out / "summary.csv")
    write_histogram(summary, out / "histogram.csv")
    print(f"runs {summary.runs}")
    print(f"converged_count {summary.converged_count}")
    print(f"converged_fraction {summary.converged_fraction!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    w = load_weights(args.weights)
    eps = decomposition_error(w, build_matmul_tensor(w.n))
    print(f"n {w.n}")
    print(f"r {w.r}")
    print(f"epsilon {eps!r}")
    print(f"max_weight {max_weight_magnitude(w)!r}")
    return EXIT_OK if eps < args.threshold else EXIT_NOT_CONVERGED


def random_transform(n: int, rng: np.random.Generator, cond_limit: float = TRANSFORM_COND_LIMIT):
    """Three n x n matrices with uniform [-1, 1] entries and condition number <= cond_limit."""
    mats = []
    while len(mats) < 3:
        M = rng.uniform(-1.0, 1.0, size=(n, n))
        if np.linalg.cond(M) <= cond_limit:
            mats.append(M)
    return tuple(mats)


def cmd_transform(args) -> int:
    w = load_weights(args.weights)
    tensor = build_matmul_tensor(w.n)
    if args.identity:
        U = V = X = np.eye(w.n)
    else:
        U, V, X = random_transform(w.n, np.random.default_rng(args.seed))
        if args.inverse:
            U, V, X = (np.linalg.inv(M) for M in (U, V, X))
    out = transform_decomposition(w, U, V, X)
    save_weights(out, args.out)
    print(f"epsilon_before {decomposition_error(w, tensor)!r}")
    print(f"epsilon_after {decomposition_error(out, tensor)!r}")
    return EXIT_OK


def cmd_fixture(args) -> int:
    w = strassen_fixture()
    eps = decomposition_error(w, build_matmul_tensor(2))
    if eps > 1e-15:
        print(f"fixture self-check failed: epsilon {eps!r}", file=sys.stderr)
        return EXIT_USAGE
    save_weights(w, args.out)
    print(f"wrote {args.out} (epsilon {eps!r})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strassen-cl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="one training run")
    _add_run_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default="trace.jsonl", help="trace output (JSON lines)")
    p.add_argument("--weights-out", help="write final weights here")
    p.add_argument("--init-weights", help="start from these weights instead of random ones")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("batch", help="independent runs with seeds master_seed + i")
    _add_run_flags(p, required=False)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="batch_out")
    p.add_argument("--traces", action="store_true", help="also write per-run trace files")
    p.add_argument(
        "--full",
        action="store_true",
        help="1000 runs of n=3, rank 23, 10^8 items each (days of CPU time)",
    )
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("verify", help="epsilon of a weight file")
    p.add_argument("weights")
    p.add_argument("--threshold", type=float, default=1e-12)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="apply a random symmetry transform to a weight file")
    p.add_argument("weights")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity", action="store_true")
    p.add_argument("--inverse", action="store_true", help="apply the inverse of the seeded transform")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("fixture", help="write Strassen's rank-7 weights")
    p.add_argument("--out", default="strassen.json")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (StrassenCLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
