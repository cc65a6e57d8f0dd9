"""Experiment orchestration: the parse/validate/reduce/solve/certify pipeline
behind the command line, random instance generation, sweeps, and the
tree-versus-engine verifier."""

from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import (Graph, PERFECT, NONPERFECT, Matching, Reduction,
                    validate, reduce_trivial, ValidationError)
from .engine import (MessageInit, StopPolicy, RunResult, run_sync,
                     extract_estimate)
from .schedule import make_schedule, run_async, coverage
from .ctree import build_tree, GCTBuilder, tree_bmatching_dp, TreeNode
from . import oracle
from .oracle import (brute_force, solve_relaxation, is_tight, check_cs,
                     iteration_bound, coverage_threshold,
                     tightness_by_enumeration, InfeasibleError,
                     LPSolution, DualCertificate)


def _fmt(value):
    if isinstance(value, Fraction):
        return str(value)
    return value


def _fmt_edges(edges):
    return sorted(list(e) for e in edges)


@dataclass
class Certification:
    bf_weight: Fraction
    bf_optima: list
    lp: LPSolution
    cert: DualCertificate
    tight: bool
    tight_reason: str
    witness: dict | None
    bound: int | None
    cs_ok: bool

    def summary(self):
        out = {
            "bf_weight": _fmt(self.bf_weight),
            "bf_optima": len(self.bf_optima),
            "lp_objective": _fmt(self.lp.objective),
            "tight": self.tight,
            "tight_reason": self.tight_reason,
            "epsilon": _fmt(self.cert.epsilon) if self.cert.epsilon is not None else None,
            "L": _fmt(self.cert.L),
            "gap_edges": _fmt_edges(self.cert.S),
            "bound": self.bound,
            "cs_ok": self.cs_ok,
        }
        if self.witness is not None:
            out["witness"] = {f"{i}-{j}": _fmt(v) for (i, j), v in sorted(self.witness.items())}
        return out


def certify_instance(g: Graph, mode: str, init: MessageInit | None = None,
                     cert_override: DualCertificate | None = None) -> Certification:
    """Oracle pipeline on one (already reduced, validated) instance."""
    bf_weight, bf_all = brute_force(g, mode)
    sol, cert = solve_relaxation(g, mode)
    if cert_override is not None:
        if oracle.dual_objective(g, cert_override) != sol.objective:
            raise oracle.CertificateError(
                "supplied dual is feasible but not optimal; its objective is "
                f"{oracle.dual_objective(g, cert_override)}, the optimum is {sol.objective}")
        cert = cert_override
    report = is_tight(g, mode)
    cs = check_cs(g, sol, cert)
    bound = iteration_bound(g, cert, init, mode) if report.tight else None
    return Certification(bf_weight, bf_all, sol, cert, report.tight, report.reason,
                         report.witness, bound, cs.ok)


@dataclass
class ExperimentReport:
    instance: str
    n: int
    m: int
    mode: str
    schedule: str | None
    certification: Certification | None
    infeasible: bool
    run: RunResult | None
    final_edges: frozenset | None
    final_weight: Fraction | None
    matching_ok: bool | None
    match: bool | None
    certified: bool
    extrapolated: bool = False
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    def exit_code(self) -> int:
        if self.infeasible:
            return 3
        if self.certified:
            # a certified run answers at its stop point: ties or a mismatch
            # there contradict the certificate and are hard failures
            if self.run is not None and self.run.estimate.ties:
                return 5
            return 0 if self.match else 5
        if self.match is True:
            return 0
        if self.run is not None and not self.run.converged:
            return 4
        if self.match is False:
            return 5
        return 0

    def to_dict(self, include_timing=False):
        out = {
            "instance": self.instance,
            "n": self.n,
            "m": self.m,
            "mode": self.mode,
            "schedule": self.schedule,
            "infeasible": self.infeasible,
            "certified": self.certified,
            "extrapolated": self.extrapolated,
            "notes": self.notes,
        }
        if self.certification is not None:
            out["certification"] = self.certification.summary()
        if self.run is not None:
            r = self.run
            out["bp"] = {
                "iterations": r.iterations,
                "stabilized_at": r.stabilized_at,
                "stable_for": r.stable_for,
                "converged": r.converged,
                "period": r.period,
                "ties": sorted(r.estimate.ties),
            }
            if r.coverage is not None:
                out["bp"]["u"] = r.coverage.u
        if self.final_edges is not None:
            out["estimate"] = _fmt_edges(self.final_edges)
            out["estimate_weight"] = _fmt(self.final_weight)
            out["matching_ok"] = self.matching_ok
        if self.match is not None:
            out["match"] = self.match
        out["exit_code"] = self.exit_code()
        if include_timing:
            out["wall_time_s"] = round(self.wall_time, 4)
        return out


def _relabel_schedule(sets, reduction: Reduction):
    """Map original-label update sets onto the reduced instance; updates of
    removed vertices' edges are dropped (their messages no longer exist)."""
    inverse = {orig: red for red, orig in reduction.vertex_map.items()}
    out = []
    for s in sets:
        out.append({(inverse[i], inverse[j]) for (i, j) in s
                    if i in inverse and j in inverse})
    return out


def _resolve_stop(stop_spec, g: Graph, certification, mode, is_async, notes):
    """Map a CLI stop spec onto a concrete policy; returns (policy, certified)."""
    if stop_spec is None:
        stop_spec = ("window", None)
    kind, arg = stop_spec
    if kind == "budget":
        return StopPolicy.budget(arg), False
    if kind == "window":
        return StopPolicy.window(arg), False
    if kind == "certified":
        if certification is None or not certification.tight:
            notes.append("certified stop unavailable (relaxation not tight); "
                         "falling back to a stability window")
            return StopPolicy.window(None, limit=10 * max(g.n, 1)), False
        if is_async:
            return StopPolicy.coverage(coverage_threshold(g, certification.cert, mode)), True
        return StopPolicy.certified(certification.bound), True
    raise ValueError(f"unknown stop kind {kind!r}")


def solve_pipeline(g: Graph, mode: str, *, instance_name="<memory>",
                   init: MessageInit | None = None, stop_spec=None,
                   schedule_kind=None, schedule_seed=None, schedule_sets=None,
                   certify=False, cert_override=None, force_schedule=False,
                   keep_trace=False) -> ExperimentReport:
    """Full solve: validate, reduce (perfect), run message passing, restore
    forced edges, and optionally certify against the oracle."""
    t0 = time.monotonic()
    notes = []
    violations = validate(g, mode)
    if violations:
        raise ValidationError(violations)

    reduction = None
    work = g
    if mode == PERFECT:
        reduction = reduce_trivial(g)
        if reduction.infeasible:
            return ExperimentReport(instance_name, g.n, g.m, mode, None, None, True,
                                    None, None, None, None, None, False,
                                    wall_time=time.monotonic() - t0,
                                    notes=["trivial-vertex cascade proves infeasibility"])
        work = reduction.graph
        if reduction.forced:
            notes.append(f"{len(reduction.forced)} forced edge(s) from trivial vertices")

    want_oracle = certify or (stop_spec is not None and stop_spec[0] == "certified")
    certification = None
    if want_oracle:
        try:
            certification = certify_instance(work, mode, init, cert_override)
        except InfeasibleError:
            return ExperimentReport(instance_name, g.n, g.m, mode, None, None, True,
                                    None, None, None, None, None, False,
                                    wall_time=time.monotonic() - t0,
                                    notes=["oracle found no feasible matching"])

    is_async = schedule_kind is not None and schedule_kind != "sync"
    stop, certified = _resolve_stop(stop_spec, work, certification, mode, is_async, notes)
    extrapolated = certified and is_async and mode == NONPERFECT
    if extrapolated:
        notes.append("asynchronous non-perfect certified stop is extrapolated")

    sched = None
    if schedule_kind is None:
        run = run_sync(work, mode, init, stop, keep_trace=keep_trace)
        sched_name = None
    else:
        if schedule_kind == "explicit":
            sets = schedule_sets
            if reduction is not None and not reduction.is_identity:
                sets = _relabel_schedule(schedule_sets, reduction)
                notes.append("schedule relabeled onto the reduced instance")
            sched = make_schedule(work, "explicit", sets=sets)
        else:
            sched = make_schedule(work, schedule_kind, seed=schedule_seed)
        if stop.kind == "window" and stop.window_size is None:
            # single-edge schedules move slowly; widen the stability window
            stop = StopPolicy.window(max(work.n, 2 * len(work.directed_edges())))
        run = run_async(work, sched, init, stop, mode,
                        check_redundancy=not force_schedule, keep_trace=keep_trace)
        sched_name = sched.describe()
        if force_schedule and not sched.trusted:
            certified = False
            notes.append("schedule validation waived; result uncertified")

    if reduction is not None:
        final = reduction.to_original(run.estimate.edges)
    else:
        final = run.estimate.edges
    weight = sum((g.weight(*e) for e in final), g.zero())
    matching = Matching(final, mode, weight)
    matching_ok = matching.is_valid(g)

    match = None
    if certification is not None:
        best = certification.bf_optima[0]
        target = reduction.to_original(best) if reduction is not None else best
        match = final == target

    return ExperimentReport(instance_name, g.n, g.m, mode, sched_name, certification,
                            False, run, final, weight, matching_ok, match,
                            certified, extrapolated, time.monotonic() - t0, notes)


# -- random instances and sweeps -----------------------------------------------------

def random_instance(rng: random.Random, n_max=6, mode=PERFECT,
                    weight_lo=None, weight_hi=None, distinct=False,
                    allow_b2=True) -> Graph:
    """Random simple graph with capacities admissible for the mode: every
    vertex keeps degree strictly above (perfect) or at least (non-perfect)
    its capacity, so perfect instances need no reduction."""
    if weight_lo is None:
        weight_lo = 1 if mode == PERFECT else -30
    if weight_hi is None:
        weight_hi = 30 if mode == PERFECT else -1
    while True:
        n = rng.randint(3, n_max)
        pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        if rng.random() < 0.5:
            chosen = pairs
        else:
            p = rng.uniform(0.5, 0.9)
            chosen = [e for e in pairs if rng.random() < p]
        deg = dict.fromkeys(range(1, n + 1), 0)
        for (i, j) in chosen:
            deg[i] += 1
            deg[j] += 1
        caps = []
        ok = True
        for i in range(1, n + 1):
            head = 1 if mode == PERFECT else 0
            if deg[i] < 1 + head:
                ok = False
                break
            b = 1
            if allow_b2 and deg[i] >= 2 + head and rng.random() < 0.2:
                b = 2
            caps.append(b)
        if not ok:
            continue
        if mode == PERFECT and sum(caps) % 2 == 1:
            # odd total capacity can never be perfectly matched; adjust one vertex
            droppable = [k for k, b in enumerate(caps) if b == 2]
            bumpable = [k for k, b in enumerate(caps) if b == 1 and deg[k + 1] >= 3]
            if droppable:
                caps[rng.choice(droppable)] = 1
            elif bumpable:
                caps[rng.choice(bumpable)] = 2
            else:
                continue
        m = len(chosen)
        if distinct and weight_hi - weight_lo + 1 >= m:
            weights = rng.sample(range(weight_lo, weight_hi + 1), m)
        else:
            weights = [rng.randint(weight_lo, weight_hi) for _ in range(m)]
        return Graph(n, caps, [(i, j, w) for (i, j), w in zip(chosen, weights)])


def analyze_instance(g: Graph, mode: str, check_enumeration=True):
    """One sweep step: oracle, consistency cross-checks, certified run."""
    row = {"n": g.n, "m": g.m, "mode": mode}
    try:
        bf_weight, bf_all = brute_force(g, mode)
    except InfeasibleError:
        row.update(feasible=False, tight=None, match=None)
        return row
    row["feasible"] = True
    sol, cert = solve_relaxation(g, mode)
    row["strong_duality"] = oracle.dual_objective(g, cert) == sol.objective
    row["cs_ok"] = check_cs(g, sol, cert).ok
    report = is_tight(g, mode)
    row["tight"] = report.tight
    if check_enumeration and g.m <= oracle.ENUMERATION_GUARD:
        enum_tight, _ = tightness_by_enumeration(g, mode, sol.objective)
        row["tight_enum"] = enum_tight
        row["tight_agree"] = enum_tight == report.tight
    if not report.tight:
        row["match"] = None
        return row
    bound = iteration_bound(g, cert, None, mode)
    row["bound"] = bound
    run = run_sync(g, mode, None, StopPolicy.certified(bound))
    row["stabilized_at"] = run.stabilized_at
    row["match"] = run.estimate.edges == bf_all[0]
    return row


def sweep(mode: str, instances=200, n_max=6, seed=0, weight_lo=None, weight_hi=None,
          distinct=False, check_enumeration=True):
    """Generate, certify, and solve random instances; aggregate the outcome."""
    rng = random.Random(seed)
    rows = []
    for _ in range(instances):
        g = random_instance(rng, n_max, mode, weight_lo, weight_hi, distinct)
        rows.append(analyze_instance(g, mode, check_enumeration))
    feasible = [r for r in rows if r.get("feasible")]
    tight = [r for r in feasible if r.get("tight")]
    matches = [r for r in tight if r.get("match")]
    agree = [r for r in rows if "tight_agree" in r]
    return {
        "mode": mode,
        "instances": len(rows),
        "feasible": len(feasible),
        "tight": len(tight),
        "matches": len(matches),
        "mismatches": len(tight) - len(matches),
        "duality_ok": all(r.get("strong_duality", True) for r in rows),
        "cs_ok": all(r.get("cs_ok", True) for r in rows),
        "tightness_agreements": len([r for r in agree if r["tight_agree"]]),
        "tightness_checked_both_ways": len(agree),
        "stabilization": {
            "max_bound": max((r["bound"] for r in tight), default=None),
            "max_stabilized_at": max((r["stabilized_at"] for r in tight), default=None),
        },
    }


# -- tree verification -----------------------------------------------------------------

def _branch_depth(node: TreeNode) -> int:
    # shortest path from the branch's top edge down to a leaf
    frontier = deque([(node, 1)])
    while frontier:
        node, d = frontier.popleft()
        if not node.children:
            return d
        for c in node.children:
            frontier.append((c, d + 1))
    raise RuntimeError("unreachable")


def tree_verify(g: Graph, t_max: int, schedule_kind=None, schedule_seed=None,
                init: MessageInit | None = None):
    """Compare engine messages/estimates against tree optimization for every
    root and every t <= t_max; returns (rows, ok, first_mismatch)."""
    rows = []
    first = None
    init_map = init.build(g) if init is not None and init.kind != "weights" else None
    if schedule_kind is None or schedule_kind == "sync":
        run = run_sync(g, PERFECT, init, StopPolicy.budget(t_max), keep_trace=True)
        sched = builder = None
    else:
        sched = make_schedule(g, schedule_kind, seed=schedule_seed)
        run = run_async(g, sched, init, StopPolicy.budget(t_max), PERFECT, keep_trace=True)
        builder = GCTBuilder(g, sched, t_max)
    for t in range(t_max + 1):
        state = run.trace[t]
        est = extract_estimate(g, state, PERFECT)
        cov = coverage(g, sched, t) if sched is not None else None
        for root in g.vertices():
            if sched is None:
                tree = build_tree(g, root, t)
            else:
                tree = builder.gct(root, t)
            dp = tree_bmatching_dp(tree, init_map)
            msgs_ok = all(dp.branches[r].n == state.m[(r, root)] for r in g.neighbors(root))
            sel_ok = frozenset(dp.selected_labels) == frozenset(est.selected[root])
            depth_ok = True
            if cov is not None:
                depth_ok = all(_branch_depth(c) >= cov.u for c in tree.root.children)
            ok = msgs_ok and sel_ok and depth_ok
            rows.append({"root": root, "t": t, "messages": msgs_ok,
                         "selection": sel_ok, "depth": depth_ok})
            if not ok and first is None:
                first = rows[-1]
    return rows, first is None, first
