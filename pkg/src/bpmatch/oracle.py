"""Ground truth for desk-scale instances.

Everything here is exact: exhaustive enumeration of optimal matchings, the
linear relaxation and its dual solved by rational simplex, complementary
slackness checking, a tightness decision (does the relaxation admit any
fractional optimum?), and the certified iteration bound for the engine.

The dual certificate carries the derived quantities the bound needs: the
set S of edges whose weight differs from the sum of its endpoints' dual
prices, the minimum such gap epsilon, and the largest price magnitude L.
Certified stopping runs ceil(2nL/epsilon) rounds in perfect mode and
ceil(4nL/epsilon) in non-perfect mode, or n+1 rounds when S is empty and
epsilon is undefined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .graph import (Graph, PERFECT, NONPERFECT, MODES, EXACT, GraphError,
                    edge_key)
from .engine import MessageInit
from .simplex import solve_lp, LPInfeasible

BRUTE_FORCE_GUARD = 30
ENUMERATION_GUARD = 18

ZERO = Fraction(0)


class OracleError(GraphError):
    pass


class InfeasibleError(OracleError):
    pass


class GuardExceeded(OracleError):
    pass


class CertificateError(OracleError):
    pass


class NotTightError(OracleError):
    pass


def _require_exact(g: Graph):
    if g.numeric_mode != EXACT:
        raise OracleError("certification requires an exact-rational graph")


def _require_mode(mode: str):
    if mode not in MODES:
        raise OracleError(f"unknown mode {mode!r}")


# -- exhaustive optimization ----------------------------------------------------

def brute_force(g: Graph, mode: str, guard: int = BRUTE_FORCE_GUARD):
    """All minimum-weight matchings by pruned exhaustive search.

    Returns (optimal weight, sorted list of optimal edge sets).  Raises
    InfeasibleError when perfect mode has no feasible matching.
    """
    _require_exact(g)
    _require_mode(mode)
    if g.m > guard:
        raise GuardExceeded(f"{g.m} edges exceeds the enumeration guard {guard}")
    edges = sorted(g.edges(), key=lambda e: (g.weight(*e), e))
    m = len(edges)
    caps = {i: g.cap(i) for i in g.vertices()}

    # Suffix data for pruning: incident-edge counts and the best (most
    # negative) achievable remaining weight.
    rem = [dict.fromkeys(g.vertices(), 0) for _ in range(m + 1)]
    neg_tail = [ZERO] * (m + 1)
    for idx in range(m - 1, -1, -1):
        rem[idx] = dict(rem[idx + 1])
        i, j = edges[idx]
        rem[idx][i] += 1
        rem[idx][j] += 1
        w = g.weight(i, j)
        neg_tail[idx] = neg_tail[idx + 1] + (w if w < 0 else ZERO)

    deg = dict.fromkeys(g.vertices(), 0)
    best = [None]
    optima = []
    chosen = []

    def dfs(idx, weight):
        if best[0] is not None and weight + neg_tail[idx] > best[0]:
            return
        if idx == m:
            if mode == PERFECT and any(deg[v] != caps[v] for v in caps):
                return
            if best[0] is None or weight < best[0]:
                best[0] = weight
                optima.clear()
            if weight == best[0]:
                optima.append(frozenset(chosen))
            return
        i, j = edges[idx]
        if deg[i] < caps[i] and deg[j] < caps[j]:
            deg[i] += 1
            deg[j] += 1
            chosen.append(edges[idx])
            dfs(idx + 1, weight + g.weight(i, j))
            chosen.pop()
            deg[i] -= 1
            deg[j] -= 1
        if mode == PERFECT:
            if deg[i] + rem[idx + 1][i] < caps[i] or deg[j] + rem[idx + 1][j] < caps[j]:
                return
        dfs(idx + 1, weight)

    dfs(0, ZERO)
    if not optima:
        raise InfeasibleError("no perfect matching exists")
    return best[0], sorted(optima, key=sorted)


# -- linear relaxation ------------------------------------------------------------

@dataclass(frozen=True)
class LPSolution:
    mode: str
    x: dict
    objective: Fraction
    integral: bool

    @classmethod
    def from_matching(cls, g: Graph, edges, mode: str) -> "LPSolution":
        keys = frozenset(edge_key(i, j) for (i, j) in edges)
        x = {e: Fraction(1) if e in keys else ZERO for e in g.edges()}
        obj = sum((g.weight(*e) for e in keys), ZERO)
        return cls(mode, x, obj, True)


@dataclass(frozen=True)
class DualCertificate:
    mode: str
    y: dict
    lam: dict
    S: frozenset
    epsilon: Fraction | None
    L: Fraction

    def gap(self, g: Graph, e) -> Fraction:
        i, j = e
        if self.mode == PERFECT:
            return g.weight(i, j) - self.y[i] - self.y[j]
        return g.weight(i, j) + self.y[i] + self.y[j]


def build_certificate(g: Graph, y, lam, mode: str, check: bool = True) -> DualCertificate:
    """Derive S / epsilon / L from dual values, verifying dual feasibility."""
    _require_exact(g)
    _require_mode(mode)
    y = {i: Fraction(y.get(i, 0)) for i in g.vertices()}
    lam = {e: Fraction(lam.get(e, 0)) for e in g.edges()}
    if check:
        problems = []
        for e, l in lam.items():
            if l < 0:
                problems.append(f"lambda{e} = {l} < 0")
        if mode == NONPERFECT:
            for i, v in y.items():
                if v < 0:
                    problems.append(f"y[{i}] = {v} < 0 in non-perfect mode")
        for (i, j) in g.edges():
            w = g.weight(i, j)
            bound = (y[i] + y[j]) if mode == PERFECT else (-y[i] - y[j])
            if w + lam[(i, j)] < bound:
                problems.append(f"edge {(i, j)}: w + lambda = {w + lam[(i, j)]} < {bound}")
        if problems:
            raise CertificateError("dual infeasible: " + "; ".join(problems))
    gaps = {}
    for e in g.edges():
        i, j = e
        gaps[e] = g.weight(i, j) - y[i] - y[j] if mode == PERFECT else g.weight(i, j) + y[i] + y[j]
    S = frozenset(e for e, v in gaps.items() if v != 0)
    epsilon = min((abs(gaps[e]) for e in S), default=None)
    L = max((abs(v) for v in y.values()), default=ZERO)
    return DualCertificate(mode, y, lam, S, epsilon, L)


def dual_objective(g: Graph, cert: DualCertificate) -> Fraction:
    total_y = sum((Fraction(g.cap(i)) * cert.y[i] for i in g.vertices()), ZERO)
    total_l = sum(cert.lam.values(), ZERO)
    return (total_y if cert.mode == PERFECT else -total_y) - total_l


def _build_relaxation(g: Graph, mode: str):
    """Rows: one per vertex then one per edge (the x <= 1 caps)."""
    edges = g.edges()
    m = len(edges)
    n = g.n
    idx = {e: k for k, e in enumerate(edges)}
    ncols = 2 * m if mode == PERFECT else 2 * m + n
    # columns: x_e (m), then [t_i (n) in non-perfect], then s_e (m)
    slack0 = m if mode == PERFECT else m + n
    A = []
    b = []
    for i in g.vertices():
        row = [ZERO] * ncols
        for j in g.neighbors(i):
            row[idx[edge_key(i, j)]] = Fraction(1)
        if mode == NONPERFECT:
            row[m + i - 1] = Fraction(1)
        A.append(row)
        b.append(Fraction(g.cap(i)))
    for k in range(m):
        row = [ZERO] * ncols
        row[k] = Fraction(1)
        row[slack0 + k] = Fraction(1)
        A.append(row)
        b.append(Fraction(1))
    c = [g.weight(*e) for e in edges] + [ZERO] * (ncols - m)
    return A, b, c, idx


def solve_relaxation(g: Graph, mode: str):
    """Optimal vertex of the relaxation plus the matching dual certificate."""
    _require_exact(g)
    _require_mode(mode)
    edges = g.edges()
    if not edges:
        if mode == PERFECT and g.n > 0:
            raise InfeasibleError("vertices with positive capacity but no edges")
        sol = LPSolution(mode, {}, ZERO, True)
        cert = build_certificate(g, {}, {}, mode)
        return sol, cert
    A, b, c, idx = _build_relaxation(g, mode)
    try:
        res = solve_lp(A, b, c)
    except LPInfeasible:
        raise InfeasibleError("relaxation infeasible") from None
    x = {e: res.x[k] for e, k in idx.items()}
    integral = all(v in (0, 1) for v in x.values())
    sol = LPSolution(mode, x, res.objective, integral)
    n = g.n
    if mode == PERFECT:
        y = {i: res.dual[i - 1] for i in g.vertices()}
    else:
        y = {i: -res.dual[i - 1] for i in g.vertices()}
    lam = {e: -res.dual[n + k] for e, k in idx.items()}
    cert = build_certificate(g, y, lam, mode)
    if dual_objective(g, cert) != sol.objective:
        raise OracleError("strong duality violated; simplex produced a bad dual")
    return sol, cert


def lp_solve(g: Graph, mode: str) -> LPSolution:
    return solve_relaxation(g, mode)[0]


def dual_solve(g: Graph, mode: str) -> DualCertificate:
    return solve_relaxation(g, mode)[1]


# -- complementary slackness -------------------------------------------------------

@dataclass(frozen=True)
class CSCheck:
    name: str
    subject: tuple
    value: object
    ok: bool


@dataclass(frozen=True)
class CSReport:
    checks: list

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.ok]


def check_cs(g: Graph, primal: LPSolution, dual: DualCertificate) -> CSReport:
    """Evaluate every complementary-slackness product exactly.

    With an integral primal the support is treated as the optimal matching
    and the sharper conditions are checked as well: member edges meet their
    dual bound with equality, non-members carry zero lambda, and (in
    non-perfect mode) unsaturated vertices carry zero price.
    """
    if primal.mode != dual.mode:
        raise OracleError("primal/dual mode mismatch")
    mode = primal.mode
    checks = []
    y, lam = dual.y, dual.lam
    for e in g.edges():
        i, j = e
        w = g.weight(i, j)
        xe = primal.x.get(e, ZERO)
        slack = w + lam[e] - y[i] - y[j] if mode == PERFECT else w + lam[e] + y[i] + y[j]
        v1 = xe * slack
        checks.append(CSCheck("edge_slack_product", e, v1, v1 == 0))
        v2 = (xe - 1) * lam[e]
        checks.append(CSCheck("upper_bound_product", e, v2, v2 == 0))
    if mode == NONPERFECT:
        for i in g.vertices():
            load = sum((primal.x.get(edge_key(i, j), ZERO) for j in g.neighbors(i)), ZERO)
            v = (load - g.cap(i)) * y[i]
            checks.append(CSCheck("vertex_slack_product", (i,), v, v == 0))
    if primal.integral:
        member = {e for e, v in primal.x.items() if v == 1}
        for e in g.edges():
            i, j = e
            w = g.weight(i, j)
            if e in member:
                slack = w + lam[e] - y[i] - y[j] if mode == PERFECT else w + lam[e] + y[i] + y[j]
                checks.append(CSCheck("member_edge_tight", e, slack, slack == 0))
            else:
                checks.append(CSCheck("nonmember_lambda_zero", e, lam[e], lam[e] == 0))
        if mode == NONPERFECT:
            degm = dict.fromkeys(g.vertices(), 0)
            for (i, j) in member:
                degm[i] += 1
                degm[j] += 1
            for i in g.vertices():
                if degm[i] < g.cap(i):
                    checks.append(CSCheck("unsaturated_price_zero", (i,), y[i], y[i] == 0))
    return CSReport(checks)


# -- tightness ------------------------------------------------------------------------

@dataclass(frozen=True)
class TightnessReport:
    tight: bool
    witness: dict | None
    reason: str
    lp_objective: Fraction
    bf_weight: Fraction
    bf_count: int


def _probe_lp(g, mode, free, fixed_one, equality_vertices, objective_edge, maximize):
    """Optimize one free edge variable over the optimal face."""
    free = list(free)
    fidx = {e: k for k, e in enumerate(free)}
    nfree = len(free)
    forced = dict.fromkeys(g.vertices(), 0)
    for (i, j) in fixed_one:
        forced[i] += 1
        forced[j] += 1
    ineq = [i for i in g.vertices() if i not in equality_vertices] if mode == NONPERFECT else []
    slack_v = {i: k for k, i in enumerate(ineq)}
    ncols = nfree + len(ineq) + nfree  # x_free, vertex slacks, cap slacks
    A, b = [], []
    for i in g.vertices():
        row = [ZERO] * ncols
        touched = False
        for j in g.neighbors(i):
            e = edge_key(i, j)
            if e in fidx:
                row[fidx[e]] = Fraction(1)
                touched = True
        if i in slack_v:
            row[nfree + slack_v[i]] = Fraction(1)
            touched = True
        rhs = Fraction(g.cap(i) - forced[i])
        if rhs < 0:
            raise OracleError("optimal face bookkeeping went negative")
        if touched or rhs != 0:
            A.append(row)
            b.append(rhs)
    for k in range(nfree):
        row = [ZERO] * ncols
        row[k] = Fraction(1)
        row[nfree + len(ineq) + k] = Fraction(1)
        A.append(row)
        b.append(Fraction(1))
    c = [ZERO] * ncols
    c[fidx[objective_edge]] = Fraction(-1) if maximize else Fraction(1)
    res = solve_lp(A, b, c)
    values = {e: res.x[fidx[e]] for e in free}
    return values


def is_tight(g: Graph, mode: str) -> TightnessReport:
    """Decide whether every optimal point of the relaxation is integral.

    Three-step decision: the relaxation value must equal the exhaustive
    optimum, the exhaustive optimum must be unique, and probing every edge
    left free by complementary slackness over the optimal face must pin it
    to a single (hence integral) point.  A fractional optimal point is
    returned as the witness whenever the answer is no.
    """
    _require_exact(g)
    _require_mode(mode)
    bf_weight, bf_all = brute_force(g, mode)
    sol, cert = solve_relaxation(g, mode)
    if sol.objective != bf_weight:
        if sol.integral:
            raise OracleError("integral relaxation optimum below the exhaustive optimum")
        return TightnessReport(False, dict(sol.x), "fractional_point_beats_integral",
                               sol.objective, bf_weight, len(bf_all))
    if len(bf_all) > 1:
        a, b_ = bf_all[0], bf_all[1]
        witness = {e: (Fraction(int(e in a)) + Fraction(int(e in b_))) / 2 for e in g.edges()}
        return TightnessReport(False, witness, "multiple_integral_optima",
                               sol.objective, bf_weight, len(bf_all))

    # Complementary slackness pins edges with a positive dual slack to 0 and
    # edges with positive lambda to 1; probe whatever is left.
    fixed_zero, fixed_one, free = set(), set(), []
    for e in g.edges():
        gap = g.weight(*e) + cert.lam[e] - (cert.y[e[0]] + cert.y[e[1]]) if mode == PERFECT \
            else g.weight(*e) + cert.lam[e] + cert.y[e[0]] + cert.y[e[1]]
        if gap > 0:
            fixed_zero.add(e)
        elif cert.lam[e] > 0:
            fixed_one.add(e)
        else:
            free.append(e)
    equality_vertices = {i for i in g.vertices() if cert.y[i] != 0} if mode == NONPERFECT else set(g.vertices())
    for e in sorted(free):
        hi = _probe_lp(g, mode, free, fixed_one, equality_vertices, e, maximize=True)
        lo = _probe_lp(g, mode, free, fixed_one, equality_vertices, e, maximize=False)
        if hi[e] != lo[e]:
            witness = {d: (hi[d] + lo[d]) / 2 for d in free}
            witness.update({d: ZERO for d in fixed_zero})
            witness.update({d: Fraction(1) for d in fixed_one})
            return TightnessReport(False, witness, "optimal_face_has_positive_dimension",
                                   sol.objective, bf_weight, 1)
    optimum = bf_all[0]
    point = dict.fromkeys(fixed_zero, ZERO)
    point.update(dict.fromkeys(fixed_one, Fraction(1)))
    point.update({e: sol.x[e] for e in free})
    if point != {e: Fraction(int(e in optimum)) for e in g.edges()}:
        raise OracleError("zero-dimensional optimal face disagrees with the exhaustive optimum")
    return TightnessReport(True, None, "unique_integral_optimum",
                           sol.objective, bf_weight, 1)


def tightness_by_enumeration(g: Graph, mode: str, lp_objective: Fraction,
                             guard: int = ENUMERATION_GUARD):
    """Independent tightness verdict via half-integral search.

    Every vertex of the relaxation polytope takes values in {0, 1/2, 1}, so
    enumerating such points at the optimal value decides tightness: tight
    means exactly one optimal point exists and it is integral.  Returns
    (tight, fractional witness or None).
    """
    _require_exact(g)
    _require_mode(mode)
    if g.m > guard:
        raise GuardExceeded(f"{g.m} edges exceeds the enumeration guard {guard}")
    edges = list(g.edges())
    m = len(edges)
    target = 2 * lp_objective
    caps2 = {i: 2 * g.cap(i) for i in g.vertices()}
    rem2 = [dict.fromkeys(g.vertices(), 0) for _ in range(m + 1)]
    lo_tail = [ZERO] * (m + 1)
    hi_tail = [ZERO] * (m + 1)
    for idx in range(m - 1, -1, -1):
        rem2[idx] = dict(rem2[idx + 1])
        i, j = edges[idx]
        rem2[idx][i] += 2
        rem2[idx][j] += 2
        w2 = 2 * g.weight(i, j)
        lo_tail[idx] = lo_tail[idx + 1] + min(ZERO, w2)
        hi_tail[idx] = hi_tail[idx + 1] + max(ZERO, w2)

    load = dict.fromkeys(g.vertices(), 0)
    assign = [0] * m
    integral_hits = []
    fractional = [None]

    def dfs(idx, weight):
        if fractional[0] is not None or len(integral_hits) > 1:
            return
        if weight + lo_tail[idx] > target or weight + hi_tail[idx] < target:
            return
        if idx == m:
            if mode == PERFECT and any(load[v] != caps2[v] for v in caps2):
                return
            if any(d == 1 for d in assign):
                fractional[0] = {e: Fraction(assign[k], 2) for k, e in enumerate(edges)}
            else:
                integral_hits.append({e: Fraction(assign[k], 2) for k, e in enumerate(edges)})
            return
        i, j = edges[idx]
        room = min(caps2[i] - load[i], caps2[j] - load[j])
        for d in (0, 1, 2):
            if d > room:
                break
            if mode == PERFECT:
                # Capacity not consumed here must stay reachable later.
                if (load[i] + d + rem2[idx + 1][i] < caps2[i]
                        or load[j] + d + rem2[idx + 1][j] < caps2[j]):
                    continue
            assign[idx] = d
            load[i] += d
            load[j] += d
            dfs(idx + 1, weight + d * g.weight(i, j))
            load[i] -= d
            load[j] -= d
            assign[idx] = 0

    dfs(0, ZERO)
    if fractional[0] is not None:
        return False, fractional[0]
    if len(integral_hits) > 1:
        return False, _midpoint(integral_hits)
    if not integral_hits:
        raise OracleError("no optimal half-integral point found; wrong objective value?")
    return True, None


def _midpoint(points):
    a, b = points[0], points[1]
    return {e: (a[e] + b[e]) / 2 for e in a}


# -- iteration bound --------------------------------------------------------------------

def iteration_bound(g: Graph, cert: DualCertificate, init: MessageInit | None = None,
                    mode: str | None = None) -> int:
    """Certified number of rounds after which the estimate is the optimum.

    ceil(2nL/eps) in perfect mode, ceil(4nL/eps) in non-perfect mode, where
    L grows by the largest initial message magnitude when the run does not
    start from the edge weights; n+1 when S is empty and eps is undefined.
    Only meaningful on tight instances.
    """
    mode = mode or cert.mode
    if mode != cert.mode:
        raise OracleError(f"certificate is for {cert.mode} mode, not {mode}")
    n = g.n
    if cert.epsilon is None:
        return n + 1
    L = cert.L
    if init is not None and init.kind != "weights":
        L = L + init.max_abs(g)
    factor = 2 if mode == PERFECT else 4
    return math.ceil(Fraction(factor * n) * L / cert.epsilon)


def coverage_threshold(g: Graph, cert: DualCertificate, mode: str | None = None) -> Fraction:
    """Asynchronous certified stop: run until u(t) exceeds this value."""
    mode = mode or cert.mode
    n = g.n
    if cert.epsilon is None:
        return Fraction(n)
    factor = 2 if mode == PERFECT else 4
    return Fraction(factor * n) * cert.L / cert.epsilon


# -- certificate files --------------------------------------------------------------------

def serialize_certificate(cert: DualCertificate) -> str:
    lines = []
    for i in sorted(cert.y):
        lines.append(f"y {i} {cert.y[i]}")
    for (i, j) in sorted(cert.lam):
        lines.append(f"lambda {i} {j} {cert.lam[(i, j)]}")
    return "\n".join(lines) + "\n"


def parse_certificate(text: str, g: Graph, mode: str) -> DualCertificate:
    """Read "y i value" / "lambda i j value" lines; absent entries are zero."""
    y, lam = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        try:
            if tokens[0] == "y" and len(tokens) == 3:
                i = int(tokens[1])
                if not 1 <= i <= g.n:
                    raise CertificateError(f"line {lineno}: vertex {i} out of range")
                y[i] = Fraction(tokens[2])
            elif tokens[0] == "lambda" and len(tokens) == 4:
                e = edge_key(int(tokens[1]), int(tokens[2]))
                if e not in g.weights():
                    raise CertificateError(f"line {lineno}: edge {e} not in graph")
                lam[e] = Fraction(tokens[3])
            else:
                raise CertificateError(f"line {lineno}: expected 'y i v' or 'lambda i j v'")
        except (ValueError, ZeroDivisionError):
            raise CertificateError(f"line {lineno}: bad number") from None
    return build_certificate(g, y, lam, mode)
