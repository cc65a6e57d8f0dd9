"""Command-line interface.

Commands: solve, certify, tree-verify, sweep, schedule-validate.  Exit codes
distinguish outcomes: 0 success, 1 unexpected error, 2 parse/validation
problems, 3 infeasible instances, 4 non-convergence, 5 mismatch against the
oracle (a hard failure on certified-tight instances).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

from .graph import (PERFECT, NONPERFECT, GraphError, GraphParseError,
                    ValidationError, parse_graph, reduce_trivial, validate)
from .engine import MessageInit, EngineError
from .schedule import (ScheduleError, make_schedule, parse_schedule,
                       validate_schedule, coverage)
from .ctree import build_tree, build_gct, dump_tree, TreeError
from .harness import (solve_pipeline, certify_instance, sweep, tree_verify,
                      _fmt_edges)
from .oracle import (InfeasibleError, GuardExceeded, CertificateError,
                     parse_certificate, serialize_certificate)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4
EXIT_MISMATCH = 5


def _read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _parse_init(spec) -> MessageInit:
    if spec is None or spec == "weights":
        return MessageInit.weights()
    if spec == "zero":
        return MessageInit.constant(0)
    if spec.startswith("file="):
        mapping = {}
        for lineno, raw in enumerate(_read(spec[5:]).splitlines(), start=1):
            body = raw.split("#", 1)[0].split()
            if not body:
                continue
            if len(body) != 3:
                raise EngineError(f"init file line {lineno}: expected 'i j value'")
            mapping[(int(body[0]), int(body[1]))] = Fraction(body[2])
        return MessageInit.explicit(mapping)
    raise EngineError(f"unknown --init {spec!r}")


def _parse_stop(spec):
    if spec is None:
        return None
    if spec == "certified":
        return ("certified", None)
    if spec.startswith("budget="):
        return ("budget", int(spec[7:]))
    if spec.startswith("window="):
        return ("window", int(spec[7:]))
    raise ValueError(f"unknown --stop {spec!r} (use budget=T, window=K, or certified)")


def _parse_schedule_flag(spec, g):
    """Returns (kind, seed, sets) or (None, None, None) for synchronous runs."""
    if spec is None or spec == "sync":
        return None, None, None
    if spec == "roundrobin":
        return "roundrobin", None, None
    if spec.startswith("random:"):
        return "random", int(spec.split(":", 1)[1]), None
    if spec.startswith("file="):
        sched = parse_schedule(_read(spec[5:]), g)
        return "explicit", None, sched.prefix(len(sched))
    raise ScheduleError(f"unknown --schedule {spec!r}")


def _emit(args, payload, human_lines):
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2, default=str))
    else:
        for line in human_lines:
            print(line)


def _write_trace(path, trace):
    lines = []
    for state in trace:
        for (i, j) in sorted(state.m):
            lines.append(f"{state.t}\t{i}\t{j}\t{state.m[(i, j)]}")
    _write(path, "\n".join(lines) + ("\n" if lines else ""))


def cmd_solve(args) -> int:
    g = parse_graph(_read(args.graph))
    init = _parse_init(args.init)
    stop_spec = _parse_stop(args.stop)
    kind, seed, sets = _parse_schedule_flag(args.schedule, g)
    if kind == "random" and seed is None:
        seed = args.seed
    cert_override = None
    if args.dual_file:
        mode_work = args.mode
        # the override applies to the reduced graph the engine runs on
        work = reduce_trivial(g).graph if args.mode == PERFECT else g
        cert_override = parse_certificate(_read(args.dual_file), work, mode_work)

    report = solve_pipeline(g, args.mode, instance_name=args.graph, init=init,
                            stop_spec=stop_spec, schedule_kind=kind,
                            schedule_seed=seed, schedule_sets=sets,
                            certify=args.certify, cert_override=cert_override,
                            force_schedule=args.force, keep_trace=bool(args.trace))
    if args.trace and report.run is not None:
        _write_trace(args.trace, report.run.trace)
    if args.emit_cert and report.certification is not None:
        _write(args.emit_cert, serialize_certificate(report.certification.cert))

    lines = [f"instance: {args.graph} (n={report.n}, m={report.m}, mode={report.mode})"]
    if report.infeasible:
        lines.append("infeasible: no perfect matching exists")
    else:
        if report.schedule:
            lines.append(f"schedule: {report.schedule}")
        c = report.certification
        if c is not None:
            lines.append(f"tight: {c.tight} ({c.tight_reason})")
            eps = c.cert.epsilon if c.cert.epsilon is not None else "undefined"
            lines.append(f"certificate: epsilon={eps} L={c.cert.L} bound={c.bound}")
        r = report.run
        lines.append(f"iterations: {r.iterations}, stabilized at {r.stabilized_at} "
                     f"(stable for {r.stable_for}), converged: {r.converged}")
        if r.period is not None:
            lines.append(f"estimate oscillates with period {r.period}")
        if r.estimate.ties:
            lines.append(f"selection ties at vertices {sorted(r.estimate.ties)}")
        lines.append(f"estimate: {_fmt_edges(report.final_edges)} weight {report.final_weight}")
        lines.append(f"valid matching: {report.matching_ok}")
        if report.match is not None:
            lines.append(f"match vs oracle: {report.match}")
        for note in report.notes:
            lines.append(f"note: {note}")
        lines.append(f"wall time: {report.wall_time:.3f}s")
    _emit(args, report.to_dict(), lines)
    return report.exit_code()


def cmd_certify(args) -> int:
    g = parse_graph(_read(args.graph))
    violations = validate(g, args.mode)
    if violations:
        raise ValidationError(violations)
    work = g
    forced = None
    if args.mode == PERFECT:
        red = reduce_trivial(g)
        if red.infeasible:
            _emit(args, {"instance": args.graph, "infeasible": True},
                  [f"instance: {args.graph}", "infeasible: trivial-vertex cascade failed"])
            return EXIT_INFEASIBLE
        work = red.graph
        forced = red.forced
    cert_override = None
    if args.dual_file:
        cert_override = parse_certificate(_read(args.dual_file), work, args.mode)
    t0 = time.monotonic()
    try:
        c = certify_instance(work, args.mode, cert_override=cert_override)
    except InfeasibleError:
        _emit(args, {"instance": args.graph, "infeasible": True},
              [f"instance: {args.graph}", "infeasible: no feasible matching"])
        return EXIT_INFEASIBLE
    if args.emit_cert:
        _write(args.emit_cert, serialize_certificate(c.cert))
    payload = {"instance": args.graph, "mode": args.mode,
               "reduced_n": work.n, "reduced_m": work.m,
               "forced": _fmt_edges(forced) if forced else [],
               "certification": c.summary()}
    eps = c.cert.epsilon
    lines = [f"instance: {args.graph} (mode={args.mode})"]
    if forced:
        lines.append(f"forced edges: {_fmt_edges(forced)}")
    lines.append(f"reduced instance: n={work.n} m={work.m}")
    lines.append(f"brute force: optimum {c.bf_weight}, {len(c.bf_optima)} optimal matching(s)")
    lines.append(f"lp: objective {c.lp.objective} ({'integral' if c.lp.integral else 'fractional'} vertex)")
    lines.append(f"tight: {c.tight} ({c.tight_reason})")
    if c.witness is not None:
        lines.append("fractional witness: "
                     + ", ".join(f"x[{i}-{j}]={v}" for (i, j), v in sorted(c.witness.items()) if v != 0))
    lines.append("dual y: " + ", ".join(f"y[{i}]={v}" for i, v in sorted(c.cert.y.items())))
    nz = {e: v for e, v in c.cert.lam.items() if v != 0}
    lines.append("dual lambda: " + (", ".join(f"l[{i}-{j}]={v}" for (i, j), v in sorted(nz.items()))
                                    if nz else "all zero"))
    lines.append(f"gap set S: {_fmt_edges(c.cert.S)}")
    if eps is None:
        lines.append(f"epsilon undefined (S empty); bound n+1 = {work.n + 1}")
    else:
        lines.append(f"epsilon = {eps}, L = {c.cert.L}")
    lines.append(f"iteration bound: {c.bound}" if c.bound is not None
                 else "iteration bound: not applicable (not tight)")
    lines.append(f"complementary slackness: {'pass' if c.cs_ok else 'FAIL'}")
    lines.append(f"wall time: {time.monotonic() - t0:.3f}s")
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_tree_verify(args) -> int:
    g = parse_graph(_read(args.graph))
    red = reduce_trivial(g)
    if red.infeasible:
        print("infeasible instance")
        return EXIT_INFEASIBLE
    work = red.graph
    kind, seed, sets = _parse_schedule_flag(args.schedule, work)
    if kind == "explicit":
        raise ScheduleError("tree-verify supports generated schedules only")
    if kind == "random" and seed is None:
        seed = args.seed
    rows, ok, first = tree_verify(work, args.t_max, kind, seed)
    if args.dump_tree:
        chunks = []
        for root in work.vertices():
            tree = (build_tree(work, root, args.t_max) if kind is None
                    else build_gct(work, make_schedule(work, kind, seed=seed), root, args.t_max))
            chunks.append(f"# root {root}, t={args.t_max}\n" + dump_tree(tree))
        _write(args.dump_tree, "\n".join(chunks))
    payload = {"instance": args.graph, "t_max": args.t_max,
               "schedule": kind or "sync", "checks": len(rows), "ok": ok,
               "first_mismatch": first}
    lines = [f"instance: {args.graph} (reduced n={work.n}), t_max={args.t_max}, "
             f"schedule={kind or 'sync'}"]
    if ok:
        lines.append(f"all {len(rows)} root/time checks passed "
                     "(messages, selections, depth)")
    else:
        lines.append(f"MISMATCH at root={first['root']} t={first['t']}: {first}")
    _emit(args, payload, lines)
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    result = sweep(args.mode, instances=args.instances, n_max=args.n_max,
                   seed=args.seed, weight_lo=args.weight_lo, weight_hi=args.weight_hi,
                   distinct=args.distinct)
    lines = [f"sweep: {result['instances']} instances (mode={args.mode}, seed={args.seed})",
             f"feasible: {result['feasible']}, tight: {result['tight']}",
             f"matches on tight: {result['matches']}/{result['tight']} "
             f"(mismatches: {result['mismatches']})",
             f"strong duality: {'ok' if result['duality_ok'] else 'FAIL'}; "
             f"complementary slackness: {'ok' if result['cs_ok'] else 'FAIL'}",
             f"tightness cross-check agreement: {result['tightness_agreements']}"
             f"/{result['tightness_checked_both_ways']}",
             f"max bound {result['stabilization']['max_bound']}, "
             f"max stabilized-at {result['stabilization']['max_stabilized_at']}",
             f"wall time: {time.monotonic() - t0:.2f}s"]
    _emit(args, result, lines)
    bad = (result["mismatches"] or not result["duality_ok"] or not result["cs_ok"]
           or result["tightness_agreements"] != result["tightness_checked_both_ways"])
    return EXIT_MISMATCH if bad else EXIT_OK


def cmd_schedule_validate(args) -> int:
    g = parse_graph(_read(args.graph))
    kind, seed, sets = _parse_schedule_flag(args.schedule, g)
    if kind is None:
        sched = make_schedule(g, "sync")
    elif kind == "explicit":
        sched = make_schedule(g, "explicit", sets=sets)
    else:
        sched = make_schedule(g, kind, seed=seed if seed is not None else args.seed)
    violation = validate_schedule(g, sched, args.horizon)
    cov = coverage(g, sched, args.horizon)
    payload = {"instance": args.graph, "schedule": sched.describe(),
               "horizon": args.horizon, "u": cov.u,
               "violation": None if violation is None else
               {"edge": list(violation.edge), "t_prev": violation.t_prev, "t": violation.t}}
    if violation is None:
        lines = [f"schedule {sched.describe()} ok over horizon {args.horizon}; u={cov.u}"]
    else:
        lines = [f"violation: edge {violation.edge} re-updated at step {violation.t} "
                 f"with no feeding update since step {violation.t_prev}"]
    _emit(args, payload, lines)
    return EXIT_OK if violation is None else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpmatch",
                                description="Message-passing b-matching solver with exact certification")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode=True):
        if mode:
            sp.add_argument("--mode", choices=[PERFECT, NONPERFECT], default=PERFECT)
        sp.add_argument("--json", action="store_true", help="machine-readable report")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("solve", help="run message passing on a graph file")
    sp.add_argument("graph")
    common(sp)
    sp.add_argument("--init", default="weights", help="weights | zero | file=PATH")
    sp.add_argument("--stop", default=None, help="budget=T | window=K | certified")
    sp.add_argument("--schedule", default=None,
                    help="sync | roundrobin | random:SEED | file=PATH")
    sp.add_argument("--certify", action="store_true",
                    help="run the oracle and compare the estimate against it")
    sp.add_argument("--force", action="store_true",
                    help="accept redundant schedules (uncertified)")
    sp.add_argument("--trace", default=None, help="write 't i j value' message trace")
    sp.add_argument("--emit-cert", default=None)
    sp.add_argument("--dual-file", default=None)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("certify", help="oracle analysis and dual certificate")
    sp.add_argument("graph")
    common(sp)
    sp.add_argument("--emit-cert", default=None)
    sp.add_argument("--dual-file", default=None)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("tree-verify", help="check the engine against tree optimization")
    sp.add_argument("graph")
    common(sp, mode=False)
    sp.add_argument("--t-max", type=int, default=4)
    sp.add_argument("--schedule", default=None, help="sync | roundrobin | random:SEED")
    sp.add_argument("--dump-tree", default=None, help="write indented tree dumps")
    sp.set_defaults(func=cmd_tree_verify)

    sp = sub.add_parser("sweep", help="random-instance sweep with oracle filtering")
    common(sp)
    sp.add_argument("--instances", type=int, default=200)
    sp.add_argument("--n-max", type=int, default=6)
    sp.add_argument("--weight-lo", type=int, default=None)
    sp.add_argument("--weight-hi", type=int, default=None)
    sp.add_argument("--distinct", action="store_true", help="distinct weights")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("schedule-validate", help="check a schedule for redundancies")
    sp.add_argument("graph")
    common(sp, mode=False)
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--horizon", type=int, default=100)
    sp.set_defaults(func=cmd_schedule_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphParseError, ValidationError, CertificateError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GraphError, GuardExceeded, TreeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
