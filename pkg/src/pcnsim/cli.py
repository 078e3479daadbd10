"""Command-line experiments with CSV output.

Exit codes: 0 success, 1 I/O error, 2 invalid parameters or input data,
3 property violation (audit failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

from . import __version__
from .analysis import potential_audit
from .core import ConfigError, PolicyKind, validate_config
from .errors import DataError, PcnSimError
from .generators import PiNConfig, gen_greedy_adversary, gen_uniform
from .harness import competitive_report, flip_decision, monte_carlo_lb, run_policy
from .network import load_graph, prune_merge, simulate_network, synthetic_edges
from .oracle import offline_dp, offline_opt_count

EXIT_OK, EXIT_IO, EXIT_SPEC, EXIT_VIOLATION = 0, 1, 2, 3


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.9g}"
    return str(x)


def _render(spec: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# pcnsim {__version__}\n")
    buf.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in spec.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _spec(args, *names) -> dict:
    spec = {"command": args.command}
    for n in names:
        if getattr(args, n) is not None:
            spec[n] = getattr(args, n)
    return spec


def cmd_single(args) -> int:
    B = args.B
    cfg = validate_config(B=B, m=1.0)
    if args.m_mode == "full":
        m = B
    else:
        m = math.floor(cfg.b) if args.integer else cfg.b
    cfg = validate_config(B=B, m=m)
    seq = gen_uniform(cfg, args.n, args.m_mode, "signed", args.seed, integer=args.integer)
    trace = run_policy(args.policy, seq, cfg)
    opt = ""
    ratio = ""
    if args.integer and float(B).is_integer():
        opt = offline_opt_count(seq, cfg)
        ratio = opt / trace.final_gain if trace.final_gain else math.inf
    row = {"seed": args.seed, "n": args.n, "policy": trace.policy, "range_mode": args.m_mode,
           "accepted": trace.final_gain, "opt_when_integer": opt, "ratio": ratio}
    cols = ["seed", "n", "policy", "range_mode", "accepted", "opt_when_integer", "ratio"]
    _emit(_render(_spec(args, "B", "m_mode", "n", "policy", "seed", "integer"), cols, [row]), args.out)
    return EXIT_OK


GREEDY_ADV_COLUMNS = ["kind", "B", "m", "phases", "policy", "alg_gain", "opt_gain", "strict_ratio",
                      "additive_bound_ok"]
PIN_COLUMNS = ["kind", "B", "m", "q", "batch_count", "num_phases", "trials", "policy",
               "mean_phase_gain", "se", "det_bound", "det_bound_ok", "det_bound_corrected",
               "det_bound_corrected_ok", "off_mean_phase_gain", "off_lower_bound_ok",
               "empirical_ratio", "ratio_se", "ratio_ok"]


def cmd_adversary(args) -> int:
    if args.kind == "greedy":
        cfg = validate_config(B=args.B, m=args.m)
        seq = gen_greedy_adversary(cfg, args.phases)
        rows = []
        for policy in (PolicyKind.GREEDY, PolicyKind.EXP):
            rep = competitive_report(seq, cfg, policy)
            rows.append({"kind": "greedy", "B": args.B, "m": args.m, "phases": args.phases, **rep.row()})
        text = _render(_spec(args, "kind", "B", "m", "phases"), GREEDY_ADV_COLUMNS, rows)
    else:
        rep = monte_carlo_lb(PiNConfig(args.B, args.m, args.n, args.seed), args.trials, jobs=args.jobs)
        rows = []
        for p in rep.policies:
            rows.append({
                "kind": "pin", "B": args.B, "m": args.m, "q": rep.q, "batch_count": rep.batch_count,
                "num_phases": rep.num_phases, "trials": rep.trials, "policy": p.policy,
                "mean_phase_gain": p.mean_phase_gain, "se": p.se,
                "det_bound": rep.det_bound, "det_bound_ok": p.det_bound_ok,
                "det_bound_corrected": rep.det_bound_corrected,
                "det_bound_corrected_ok": p.det_bound_corrected_ok,
                "off_mean_phase_gain": rep.off_mean_phase_gain,
                "off_lower_bound_ok": rep.off_lower_bound_ok,
                "empirical_ratio": float(p.empirical_ratio), "ratio_se": p.ratio_se,
                "ratio_ok": bool(p.ratio_ok),
            })
        text = _render(_spec(args, "kind", "B", "m", "n", "trials", "seed"), PIN_COLUMNS, rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    B = args.B
    if not float(B).is_integer():
        raise ConfigError("audit needs an integer B for the DP oracle")
    probe = validate_config(B=B, m=1.0)
    cfg = validate_config(B=B, m=math.floor(probe.b))
    seq = gen_uniform(cfg, args.n, "guarantee", "signed", args.seed, integer=True)
    alg = run_policy(PolicyKind.EXP, seq, cfg)
    ref = offline_dp(seq, cfg).to_trace(seq, cfg)
    if args.inject_fault:
        both = (alg.accepted & ref.accepted).nonzero()[0]
        if both.size == 0:
            raise ConfigError("no step where both EXP and the optimum accept; nothing to flip")
        alg = flip_decision(alg, seq, cfg, int(both[0]))
    report = potential_audit(alg, ref, cfg)
    header = f"# pcnsim {__version__}\n# " + " ".join(
        f"{k}={_fmt(v)}" for k, v in _spec(args, "B", "n", "seed", "inject_fault").items()) + "\n"
    _emit(header + report.to_csv(), args.out)
    if not report.passed:
        rec = report.record(report.first_violation)
        k = rec.step - 1
        print(f"audit violation at step {rec.step}: lhs={report.lhs[k]:.9g} < rhs={report.rhs[k]:.9g} "
              f"(alg_gain={rec.alg_gain}, ref_gain={rec.ref_gain}, "
              f"phi {rec.phi_before:.9g} -> {rec.phi_after:.9g})", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_network(args) -> int:
    if args.graph:
        try:
            graph, _ = load_graph(args.graph)
        except OSError as exc:
            raise DataError(f"cannot read graph {args.graph}: {exc}") from None
    else:
        graph, _ = prune_merge(synthetic_edges(args.synthetic))
    stats = simulate_network(graph, args.n, args.policy, args.range_mode, args.seed,
                             resample_limit=args.resample_limit)
    cols = ["policy", "range_mode", "seed", "attempted", "routed", "accepted", "resample_exhausted"]
    spec = _spec(args, "graph", "synthetic", "n", "policy", "range_mode", "seed", "resample_limit")
    _emit(_render(spec, cols, [stats.row()]), args.out)
    return EXIT_OK


def _default_seed() -> int:
    raw = os.environ.get("PCNSIM_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"PCNSIM_SEED must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    p = argparse.ArgumentParser(prog="pcnsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pcnsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("single", help="one channel, uniform random traffic")
    s.add_argument("--B", type=float, required=True)
    s.add_argument("--m-mode", choices=["full", "guarantee"], default="guarantee")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--policy", choices=["exp", "greedy"], default="exp")
    s.add_argument("--integer", action="store_true", help="integer amounts; also reports the offline optimum")
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_single)

    a = sub.add_parser("adversary", help="adversarial constructions")
    a.add_argument("kind", choices=["greedy", "pin"])
    a.add_argument("--B", type=float, required=True)
    a.add_argument("--m", type=float, required=True)
    a.add_argument("--phases", type=int, default=10)
    a.add_argument("--n", type=int, default=25, help="phase pairs (pin)")
    a.add_argument("--trials", type=int, default=500)
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--seed", type=int, default=seed)
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_adversary)

    d = sub.add_parser("audit", help="potential-function audit of EXP against the optimum")
    d.add_argument("--B", type=float, required=True)
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--seed", type=int, default=seed)
    d.add_argument("--out", default="-")
    d.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    d.set_defaults(func=cmd_audit)

    w = sub.add_parser("network", help="multi-hop routing simulation")
    g = w.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph")
    g.add_argument("--synthetic")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--policy", choices=["exp", "greedy"], default="exp")
    w.add_argument("--range-mode", choices=["full", "guarantee"], default="guarantee")
    w.add_argument("--resample-limit", type=int, default=10)
    w.add_argument("--seed", type=int, default=seed)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_network)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PcnSimError as exc:
        print(f"pcnsim: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except ValueError as exc:
        print(f"pcnsim: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"pcnsim: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
