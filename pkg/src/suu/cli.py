"""Command-line front end.

    suu gen --random -n 8 -m 4 --seed 1 -o a.json
    suu run --policy sem --trials 1000 --seed 9 a.json
    suu compare --policies obl,sem,greedy --oracle --trials 500 --seed 3 a.json b.json
    suu oracle a.json --out table.json
    suu report results.json

Exit codes: 0 ok, 1 internal error, 2 usage or bad input, 3 policy and
precedence mismatch, 4 oracle size limits exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as rngs
from .lp import solve_lp1
from .model import (InstanceFormatError, InstanceValidationError, UnsupportedPrecedence, Instance,
                    generate_lr_hard_instance, generate_random_instance, read_instance, validate_instance,
                    write_instance)
from .oracle import OracleLimitError, OracleLimits, exact_expected_makespan
from .policies import POLICY_NAMES, build_policy, check_compatible, factory
from .simulator import (ESTIMATE_COLUMNS, WorkThresholds, draw_thresholds, estimate, execute,
                        offline_lower_bound)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INCOMPATIBLE, EXIT_LIMITS = 0, 1, 2, 3, 4

REPORT_COLUMNS = ["instance_id", "policy", "trials", "mean", "stderr", "p50", "p95", "lp_lower",
                  "offline_lower", "oracle", "ratio_lp", "ratio_offline", "ratio_oracle"]


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """Six significant digits for floats, blank for missing values."""
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit(rows: list[dict], columns: list[str], fmt_name: str, out: Path | None) -> None:
    """Print rows (6 significant digits as CSV, full precision as JSON); optionally save them."""
    if fmt_name == "json":
        text = json.dumps(rows, indent=1) + "\n"
    else:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([fmt(r.get(c)) for c in columns])
        text = buf.getvalue()
    sys.stdout.write(text)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _load(path: str) -> Instance:
    try:
        return read_instance(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no such instance file: {path}") from exc
    except (InstanceFormatError, InstanceValidationError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _need_seed(args, what: str) -> int:
    if args.seed is None:
        raise UsageError(f"{what} is random; pass --seed")
    return args.seed


# -- gen ---------------------------------------------------------------------

def _parse_chains(spec: str) -> tuple[int, int]:
    try:
        k, length = (int(x) for x in spec.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"--chains expects KxL (e.g. 3x4), got {spec!r}") from exc
    if k < 1 or length < 1:
        raise UsageError("--chains needs at least one chain of at least one job")
    return k, length


def cmd_gen(args) -> int:
    if args.lr_hard:
        if args.n is None or args.m is None:
            raise UsageError("--lr-hard needs -n and -m")
        try:
            inst = generate_lr_hard_instance(args.n, args.m)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        seed = _need_seed(args, "instance generation")
        common = dict(q_low=args.q_low, q_high=args.q_high, seed=seed)
        if args.chains:
            k, length = _parse_chains(args.chains)
            if args.m is None:
                raise UsageError("--chains needs -m")
            inst = generate_random_instance(k * length, args.m, "chains", chain_length=length, **common)
        else:
            if args.n is None or args.m is None:
                raise UsageError("-n and -m are required")
            shape = "forest" if args.forest else "dag" if args.dag else "independent"
            try:
                inst = generate_random_instance(args.n, args.m, shape, n_trees=args.trees,
                                                direction=args.direction, edge_prob=args.edge_prob, **common)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
    report = validate_instance(inst)
    if args.out is not None:
        write_instance(inst, args.out)
    print(f"id {inst.instance_id()}  n={inst.n} m={inst.m} precedence={inst.precedence.kind}  "
          f"{'valid' if report.ok else 'INVALID'}")
    for v in report.violations:
        print(f"  {v}")
    return EXIT_OK if report.ok else EXIT_USAGE


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    inst = _load(args.instance)
    check_compatible(args.policy, inst)
    seed = _need_seed(args, "execution")
    limits = OracleLimits(args.n_max, args.m_max)
    if args.policy == "oracle":
        exact_expected_makespan(inst, limits)  # fail early on limits
    est = estimate(factory(args.policy, limits), inst, args.trials, seed, workers=args.workers)
    row = est.csv_row(inst.instance_id(), args.policy)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        # trial 0 re-executed with its thresholds and delays, recorded in full
        th = draw_thresholds(inst, seed, 1)
        pol = build_policy(args.policy, inst, rngs.derive_seed(seed, rngs.DELAYS, 0), limits=limits)
        trace = execute(pol, inst, seed, thresholds=WorkThresholds(th.r[0], th.w[0]))
        (out / "trace.jsonl").write_text(trace.to_jsonl())
        summary = {"estimate": row, "trial0": trace.summary(), "seed": seed}
        (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
        emit([row], ESTIMATE_COLUMNS, args.format, out / f"estimate.{args.format}")
    else:
        emit([row], ESTIMATE_COLUMNS, args.format, None)
    return EXIT_OK


# -- compare -----------------------------------------------------------------

def _ratio(num, den):
    return num / den if den else None


def compare_rows(inst: Instance, policies: list[str], trials: int, seed: int, *, workers: int = 1,
                 with_oracle: bool = False, offline_trials: int = 200,
                 limits: OracleLimits = OracleLimits()) -> list[dict]:
    """Paired comparison: every policy sees the same thresholds trial by trial."""
    for p in policies:
        check_compatible(p, inst)
    iid = inst.instance_id()
    lp_lower = solve_lp1(inst, range(inst.n), 0.5).t_star / 2.0
    k = min(trials, offline_trials)
    batch = draw_thresholds(inst, seed, trials)
    relaxed = Instance(inst.q)  # dropping precedence keeps the bound valid
    offline = np.array([offline_lower_bound(relaxed, batch.w[t]) for t in range(k)])
    oracle = exact_expected_makespan(inst, limits)[0] if with_oracle or "oracle" in policies else None
    rows = []
    for p in policies:
        est = estimate(factory(p, limits), inst, trials, seed, workers=workers)
        row = est.csv_row(iid, p)
        paired_mean = float(np.mean(est.makespans[:k]))
        row.update(lp_lower=lp_lower, offline_lower=float(offline.mean()), oracle=oracle,
                   ratio_lp=_ratio(est.mean, lp_lower),
                   ratio_offline=_ratio(paired_mean, float(offline.mean())),
                   ratio_oracle=_ratio(est.mean, oracle))
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    seed = _need_seed(args, "comparison")
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not policies:
        raise UsageError("--policies needs at least one policy")
    if len(policies) < 2 and not args.oracle:
        print("note: a single policy is compared against the lower bounds only", file=sys.stderr)
    unknown = [p for p in policies if p not in POLICY_NAMES]
    if unknown:
        raise UsageError(f"unknown policies {unknown}; choose from {', '.join(POLICY_NAMES)}")
    limits = OracleLimits(args.n_max, args.m_max)
    rows = []
    for path in args.instances:
        rows += compare_rows(_load(path), policies, args.trials, seed, workers=args.workers,
                             with_oracle=args.oracle, offline_trials=args.offline_trials, limits=limits)
    emit(rows, REPORT_COLUMNS, args.format, Path(args.out) if args.out else None)
    return EXIT_OK


# -- oracle ------------------------------------------------------------------

def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    value, table = exact_expected_makespan(inst, OracleLimits(args.n_max, args.m_max))
    print(f"{value:.6g}" if args.format == "csv" else json.dumps({"instance_id": inst.instance_id(),
                                                                    "value": value}))
    if args.out is not None:
        Path(args.out).write_text(table.dumps() + "\n")
    return EXIT_OK


# -- report ------------------------------------------------------------------

def _read_rows(path: str) -> list[dict]:
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return json.loads(text)
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({k: _num(v) for k, v in r.items()})
    return rows


def _num(v: str):
    if v == "":
        return None
    try:
        x = float(v)
    except ValueError:
        return v
    return int(x) if x.is_integer() and "." not in v and "e" not in v.lower() else x


def cmd_report(args) -> int:
    rows = []
    for path in args.results:
        try:
            rows += _read_rows(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
    rows.sort(key=lambda r: (str(r.get("instance_id")), str(r.get("policy"))))
    emit(rows, REPORT_COLUMNS, args.format, Path(args.out) if args.out else None)
    if args.summary:
        by_policy: dict[str, list[float]] = {}
        for r in rows:
            if r.get("ratio_offline") is not None:
                by_policy.setdefault(str(r["policy"]), []).append(float(r["ratio_offline"]))
        for p, rs in sorted(by_policy.items()):
            gm = math.exp(sum(math.log(x) for x in rs) / len(rs))
            print(f"# {p}: {len(rs)} instances, geometric mean ratio_offline {gm:.6g}, max {max(rs):.6g}",
                  file=sys.stderr)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (required for random commands)")
    common.add_argument("--out", "-o", default=None, help="output file or directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="worker processes for trials (default: all cores)")
    limits = argparse.ArgumentParser(add_help=False)
    limits.add_argument("--n-max", type=int, default=OracleLimits.n_max, help="oracle job limit")
    limits.add_argument("--m-max", type=int, default=OracleLimits.m_max, help="oracle machine limit")

    ap = argparse.ArgumentParser(prog="suu", description="Scheduling under uncertainty: schedulers, "
                                 "simulator, lower bounds and exact oracle.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate an instance file")
    kind = g.add_mutually_exclusive_group(required=True)
    kind.add_argument("--random", action="store_true", help="independent jobs, q uniform in [q-low, q-high]")
    kind.add_argument("--lr-hard", action="store_true", help="deterministic hard family for the greedy baseline")
    kind.add_argument("--chains", metavar="KxL", help="K disjoint chains of L jobs")
    kind.add_argument("--forest", action="store_true", help="random forest precedence")
    kind.add_argument("--dag", action="store_true", help="random DAG precedence")
    g.add_argument("-n", type=int)
    g.add_argument("-m", type=int)
    g.add_argument("--q-low", type=float, default=0.1)
    g.add_argument("--q-high", type=float, default=0.9)
    g.add_argument("--trees", type=int, default=1)
    g.add_argument("--direction", choices=("out", "in"), default="out")
    g.add_argument("--edge-prob", type=float, default=0.2)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", parents=[common, limits], help="run one policy on an instance")
    r.add_argument("instance")
    r.add_argument("--policy", required=True, choices=POLICY_NAMES)
    r.add_argument("--trials", type=int, default=1)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", parents=[common, limits], help="paired comparison of policies")
    c.add_argument("instances", nargs="+")
    c.add_argument("--policies", required=True, help="comma-separated policy names")
    c.add_argument("--trials", type=int, default=1000)
    c.add_argument("--oracle", action="store_true", help="also compute the exact optimum")
    c.add_argument("--offline-trials", type=int, default=200,
                   help="trials used for the per-sample offline bound")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", parents=[common, limits], help="exact optimum of a tiny instance")
    o.add_argument("instance")
    o.set_defaults(func=cmd_oracle)

    rp = sub.add_parser("report", parents=[common], help="merge and print result files")
    rp.add_argument("results", nargs="+")
    rp.add_argument("--summary", action="store_true", help="per-policy ratio summary on stderr")
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        ap.error("--trials must be >= 1")
    if args.workers < 1:
        ap.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"suu {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedPrecedence as exc:
        print(f"suu {args.command}: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except OracleLimitError as exc:
        print(f"suu {args.command}: {exc}", file=sys.stderr)
        return EXIT_LIMITS
    except Exception as exc:  # noqa: BLE001
        print(f"suu {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
