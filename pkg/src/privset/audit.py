"""Exact verification of the privacy and reliability guarantees at desk scale.

Three kinds of checks, all in exact arithmetic (Fractions over F_q; zero
means zero):

* reliability: decode output equals the stored symbols, every trial;
* user privacy: the view of each single database - query, answer, messages,
  shared randomness - has identical distribution whichever messages are
  desired;
* database privacy: the querying side's whole view leaves the posterior of
  every undesired symbol exactly uniform.

The linear one-round scheme is small enough to enumerate outright: every
strategy draw, message realization, and randomness realization is visited
and the joint distributions are compared literally.

The query-table scheme's strategy space (one permutation per message plus a
pool relabeling) is astronomically large, so its user-privacy audit is
factored: the deterministic skeleton is compared byte-for-byte across
desired sets, each randomized component's marginal distribution is
enumerated exhaustively, and the factorization premises (the emitted query
is the component draw applied to a fixed structural pattern; queries are
independent of messages and randomness; answers replay deterministically)
are verified mechanically.  Database privacy for instances too large to
enumerate uses exact Gaussian elimination over the wire coefficient matrix:
for a linear scheme the posterior is uniform on the complement of the
recoverable span, so posterior-equals-prior is equivalent to the span
containing no undesired coordinate functional.

Mutated schemes (negative controls) are first-class: an audit that cannot
fail them is itself broken, and the test suite insists they fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations, product
from math import factorial
from random import Random

from . import block_scheme, table_scheme
from .field import Field, SymbolVector
from .params import ParamError, SchemeParams
from .storage import CommonRandomnessPool, MessageStore

DEFAULT_BUDGET = 2**24


class AuditBudgetExceeded(RuntimeError):
    """The instance is not exhaustively enumerable within budget; refusing to sample."""


@dataclass
class Verdict:
    ok: bool
    distance: Fraction
    detail: str

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class LeakageReport:
    recoverable: frozenset[int]
    expected: frozenset[int]

    @property
    def ok(self) -> bool:
        return self.recoverable == self.expected


class _ScriptedRandom:
    """Replays prescribed outcomes for shuffle/randrange so strategy spaces
    can be enumerated exactly instead of sampled."""

    def __init__(self, shuffle_orders: list[tuple[int, ...]], randrange_values: list[int]):
        self._orders = list(shuffle_orders)
        self._values = list(randrange_values)

    def shuffle(self, x: list) -> None:
        order = self._orders.pop(0)
        if len(order) != len(x):
            raise ValueError("scripted shuffle length mismatch")
        x[:] = [x[i] for i in order]

    def randrange(self, n: int) -> int:
        v = self._values.pop(0)
        if not 0 <= v < n:
            raise ValueError("scripted randrange value out of range")
        return v

    def exhausted(self) -> bool:
        return not self._orders and not self._values


def _check_budget(atoms: int, budget: int) -> None:
    if atoms > budget:
        raise AuditBudgetExceeded(f"{atoms} atoms exceed the {budget} budget; refusing to sample")


def total_variation(p: dict, q: dict) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(p.get(k, Fraction(0)) - q.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


# ---------------------------------------------------------------------------
# Linear (block) scheme: full enumeration
# ---------------------------------------------------------------------------

BLOCK_MUTANT_NO_BASE_MASK = "no_base_mask"
BLOCK_MUTANT_NO_CR = "no_cr"


def _block_mutate(plan: block_scheme.BlockPlan, mutant: str | None) -> block_scheme.BlockPlan:
    if mutant is None:
        return plan
    if mutant == BLOCK_MUTANT_NO_BASE_MASK:
        field = Field(plan.params.q)
        KL = plan.params.K * plan.params.L
        for db in range(plan.params.N):
            new = []
            for bq in plan.queries[db]:
                if bq.probe_coord is not None:
                    elems = [0] * KL
                    elems[bq.probe_coord] = 1
                    bq = block_scheme.BlockQuery(bq.block, bq.db, SymbolVector(field, elems), bq.cr_id, bq.probe_coord)
                new.append(bq)
            plan.queries[db] = new
        return plan
    if mutant == BLOCK_MUTANT_NO_CR:
        return plan  # handled at pool construction
    raise ParamError(f"unknown block mutant {mutant!r}")


def _enum_block_strategies(params: SchemeParams, desired: tuple[int, ...], mutant: str | None, budget: int):
    """Yield (weight, plan) over the whole strategy space, exactly."""
    P, L, N, q, K = params.P, params.L, params.N, params.q, params.K
    PL = P * L
    n_blocks = -(-PL // (N - 1))
    n_syms = n_blocks * K * L
    n_perms = factorial(PL)
    _check_budget(n_perms * q**n_syms, budget)
    weight = Fraction(1, n_perms * q**n_syms)
    for order in permutations(range(PL)):
        for draws in product(range(q), repeat=n_syms):
            rng = _ScriptedRandom([order], list(draws))
            plan = block_scheme.plan_blocks(params, desired, rng)
            assert rng.exhausted()
            yield weight, _block_mutate(plan, mutant)


def _block_pool(params: SchemeParams, symbols: tuple[int, ...], mutant: str | None) -> CommonRandomnessPool:
    if mutant == BLOCK_MUTANT_NO_CR:
        symbols = tuple(0 for _ in symbols)
    return CommonRandomnessPool(params.q, list(symbols))


def audit_block_user_privacy(
    params: SchemeParams, mutant: str | None = None, budget: int = DEFAULT_BUDGET
) -> Verdict:
    """Exact distributional equality of (Q_n, A_n, W, S) across all desired sets."""
    K, P, L, N, q = params.K, params.P, params.L, params.N, params.q
    n_blocks = -(-P * L // (N - 1))
    w_space = q ** (K * L)
    s_space = q**n_blocks
    strat = factorial(P * L) * q ** (n_blocks * K * L)
    _check_budget(strat * w_space * s_space * 2, budget)

    desired_sets = list(combinations(range(K), P))
    dists: list[list[dict]] = []  # per desired set, per database
    for desired in desired_sets:
        per_db: list[dict] = [{} for _ in range(N)]
        for weight, plan in _enum_block_strategies(params, desired, mutant, budget):
            wires = [plan.wire_query(db) for db in range(N)]
            for w_flat in product(range(q), repeat=K * L):
                store = MessageStore(q, [list(w_flat[m * L : (m + 1) * L]) for m in range(K)])
                for s_vals in product(range(q), repeat=n_blocks):
                    pool = _block_pool(params, s_vals, mutant)
                    wgt = weight * Fraction(1, w_space * s_space)
                    for db in range(N):
                        ans = tuple(block_scheme.answer_wire_query(wires[db], store, pool))
                        key = (wires[db], ans, w_flat, s_vals)
                        per_db[db][key] = per_db[db].get(key, Fraction(0)) + wgt
        dists.append(per_db)

    worst = Fraction(0)
    for db in range(N):
        base = dists[0][db]
        for other in dists[1:]:
            worst = max(worst, total_variation(base, other[db]))
    return Verdict(worst == 0, worst, f"max per-database total variation {worst}")


def audit_block_db_privacy(
    params: SchemeParams, mutant: str | None = None, budget: int = DEFAULT_BUDGET
) -> Verdict:
    """Posterior of the undesired symbols given the querying side's whole view
    must equal the uniform prior, for every view of nonzero probability."""
    K, P, L, N, q = params.K, params.P, params.L, params.N, params.q
    desired = tuple(range(P))
    n_blocks = -(-P * L // (N - 1))
    w_space = q ** (K * L)
    s_space = q**n_blocks
    strat = factorial(P * L) * q ** (n_blocks * K * L)
    _check_budget(strat * w_space * s_space, budget)

    undesired_coords = [m * L + s for m in range(K) if m not in set(desired) for s in range(L)]
    groups: dict = {}
    fidx = 0
    for weight, plan in _enum_block_strategies(params, desired, mutant, budget):
        fidx += 1
        wires = tuple(plan.wire_query(db) for db in range(N))
        for w_flat in product(range(q), repeat=K * L):
            store = MessageStore(q, [list(w_flat[m * L : (m + 1) * L]) for m in range(K)])
            for s_vals in product(range(q), repeat=n_blocks):
                pool = _block_pool(params, s_vals, mutant)
                answers = tuple(tuple(block_scheme.answer_wire_query(wires[db], store, pool)) for db in range(N))
                view = (fidx, wires, answers)
                wbar = tuple(w_flat[c] for c in undesired_coords)
                groups.setdefault(view, {})
                groups[view][wbar] = groups[view].get(wbar, 0) + 1

    expected = q ** len(undesired_coords)
    for view, counts in groups.items():
        values = set(counts.values())
        if len(counts) != expected or len(values) != 1:
            return Verdict(False, Fraction(1), "posterior of undesired symbols differs from prior")
    return Verdict(True, Fraction(0), f"{len(groups)} views checked, posterior uniform in all")


# ---------------------------------------------------------------------------
# Table scheme: factored user-privacy audit
# ---------------------------------------------------------------------------

TABLE_MUTANT_NO_INDEX_PERM = "no_index_permutation"
TABLE_MUTANT_NO_POOL_RELABEL = "no_pool_relabel"
TABLE_MUTANT_NO_HIDDEN_CR = "no_hidden_cr"


def _identity_orders(K: int, L: int, pool: int) -> list[tuple[int, ...]]:
    return [tuple(range(L)) for _ in range(K)] + [tuple(range(pool))]


def _table_build(params: SchemeParams, desired, orders, mutant: str | None, reps=None):
    rng = _ScriptedRandom(list(orders), [])
    table = table_scheme.build_query_table(params, desired, rng, reps=reps)
    if mutant == TABLE_MUTANT_NO_INDEX_PERM:
        table.msg_perm = [list(range(table.L_store)) for _ in range(params.K)]
    elif mutant == TABLE_MUTANT_NO_POOL_RELABEL:
        table.pool_perm = list(range(table.pool_size))
    return table


def _table_shape(params: SchemeParams):
    """L_store and pool size for scripted builds (identity probe build)."""
    probe = table_scheme.build_query_table(params, tuple(range(params.P)), Random(0))
    return probe.L_store, probe.pool_size, probe.reps


@dataclass
class _WireView:
    """Parsed per-database wire query: the audit works on wire bytes only."""

    n_plain: int
    plain_ids: tuple[int, ...]
    sums: tuple[tuple[tuple[int, int], ...], ...]  # terms per sum
    sum_ids: tuple[int, ...]

    @property
    def skeleton(self):
        return (self.n_plain, tuple(tuple(m for m, _ in s) for s in self.sums))

    def msg_indices(self, msg: int) -> tuple[int, ...]:
        out = []
        for s in self.sums:
            for m, idx in s:
                if m == msg:
                    out.append(idx)
        return tuple(out)

    def visible_ids(self) -> tuple[int, ...]:
        return self.plain_ids + self.sum_ids


def _parse_table_wire(payload: bytes) -> _WireView:
    import struct as _s

    off = 1
    (n_plain,) = _s.unpack_from("<I", payload, off)
    off += 4
    plain_ids = []
    for _ in range(n_plain):
        (pid,) = _s.unpack_from("<I", payload, off)
        off += 4
        plain_ids.append(pid)
    (n_sums,) = _s.unpack_from("<I", payload, off)
    off += 4
    sums, sum_ids = [], []
    for _ in range(n_sums):
        (nterms,) = _s.unpack_from("<B", payload, off)
        off += 1
        terms = []
        for _ in range(nterms):
            m, idx = _s.unpack_from("<BI", payload, off)
            off += 5
            terms.append((m, idx))
        (pid,) = _s.unpack_from("<I", payload, off)
        off += 4
        sums.append(tuple(terms))
        sum_ids.append(pid)
    return _WireView(n_plain, tuple(plain_ids), tuple(sums), tuple(sum_ids))


def audit_table_user_privacy(
    params: SchemeParams,
    mutant: str | None = None,
    budget: int = DEFAULT_BUDGET,
    mechanism_samples: int = 40,
    reps: int | None = None,
) -> Verdict:
    """Exact equality of each database's query distribution across desired sets.

    The query factorizes as (fixed skeleton, per-message position draws, pool
    relabeling draw); each factor's distribution is enumerated exhaustively
    and compared across desired sets, after mechanically verifying the
    factorization on sampled draws and checking the structural premises
    (identical skeletons, per-database distinctness, query independence of
    messages and randomness via the scripted build being data-free).
    """
    K, P, N = params.K, params.P, params.N
    L_store, pool_size, eff_reps = _table_shape(params)
    if reps is not None:
        probe = table_scheme.build_query_table(params, tuple(range(P)), Random(0), reps=reps)
        L_store, pool_size, eff_reps = probe.L_store, probe.pool_size, probe.reps
    _check_budget(max(factorial(L_store), factorial(pool_size)), budget)

    desired_sets = list(combinations(range(K), P))
    ident = _identity_orders(K, L_store, pool_size)
    views: dict[tuple, list[_WireView]] = {}
    for desired in desired_sets:
        table = _table_build(params, desired, ident, mutant, reps=reps)
        views[desired] = [_parse_table_wire(table.wire_query(db)) for db in range(N)]

    # Premise 1: identical skeletons and counts across desired sets.
    base = views[desired_sets[0]]
    for desired in desired_sets[1:]:
        for db in range(N):
            if views[desired][db].skeleton != base[db].skeleton:
                return Verdict(False, Fraction(1), f"query skeleton differs at database {db}")

    # Premise 2: within one database every position reference is distinct per
    # message and every randomness id is seen at most once.
    for desired in desired_sets:
        for db in range(N):
            v = views[desired][db]
            for m in range(K):
                idxs = v.msg_indices(m)
                if len(set(idxs)) != len(idxs):
                    return Verdict(False, Fraction(1), f"repeated position of message {m} at database {db}")
            ids = v.visible_ids()
            if len(set(ids)) != len(ids):
                return Verdict(False, Fraction(1), f"repeated randomness id at database {db}")

    # Premise 3 (mechanism): the emitted query equals the component draw
    # applied to the identity-build structure, for sampled draws.
    check_rng = Random(2024)
    for _ in range(mechanism_samples):
        comp = check_rng.randrange(K + 1)
        orders = list(ident)
        size = L_store if comp < K else pool_size
        perm = list(range(size))
        check_rng.shuffle(perm)
        orders[comp] = tuple(perm)
        desired = desired_sets[check_rng.randrange(len(desired_sets))]
        table = _table_build(params, desired, orders, mutant, reps=reps)
        got = [_parse_table_wire(table.wire_query(db)) for db in range(N)]
        ref = views[desired]
        for db in range(N):
            if comp < K:
                want = tuple(perm[i] for i in ref[db].msg_indices(comp))
                if got[db].msg_indices(comp) != want:
                    return Verdict(False, Fraction(1), f"message {comp} positions do not follow the drawn permutation")
                for other in range(K):
                    if other != comp and got[db].msg_indices(other) != ref[db].msg_indices(other):
                        return Verdict(False, Fraction(1), "component draws are not independent")
                if got[db].visible_ids() != ref[db].visible_ids():
                    return Verdict(False, Fraction(1), "pool labels changed under a message draw")
            else:
                want_ids = tuple(perm[i] for i in ref[db].visible_ids())
                if got[db].visible_ids() != want_ids:
                    return Verdict(False, Fraction(1), "randomness ids do not follow the drawn relabeling")

    # Premise 4: the scripted build never touched messages or randomness, so
    # queries are independent of (W, S) by construction; re-assert by replay.
    again = _table_build(params, desired_sets[0], ident, mutant, reps=reps)
    if [_parse_table_wire(again.wire_query(db)) for db in range(N)] != base:
        return Verdict(False, Fraction(1), "query generation is not deterministic in the strategy draw")

    # Exhaustive component distributions, compared across desired sets.
    worst = Fraction(0)
    w_msg = Fraction(1, factorial(L_store))
    w_pool = Fraction(1, factorial(pool_size))
    for db in range(N):
        for m in range(K):
            dists = []
            for desired in desired_sets:
                struct = views[desired][db].msg_indices(m)
                dist: dict = {}
                for perm in permutations(range(L_store)):
                    key = tuple(perm[i] for i in struct)
                    dist[key] = dist.get(key, Fraction(0)) + w_msg
                dists.append(dist)
            for other in dists[1:]:
                worst = max(worst, total_variation(dists[0], other))
        dists = []
        for desired in desired_sets:
            struct = views[desired][db].visible_ids()
            dist = {}
            for perm in permutations(range(pool_size)):
                key = tuple(perm[i] for i in struct)
                dist[key] = dist.get(key, Fraction(0)) + w_pool
            dists.append(dist)
        for other in dists[1:]:
            worst = max(worst, total_variation(dists[0], other))

    return Verdict(worst == 0, worst, f"max component total variation {worst}")


# ---------------------------------------------------------------------------
# Database privacy via exact linear algebra (any linear scheme)
# ---------------------------------------------------------------------------


def _rows_from_wire(payload: bytes, n_coords: int, pool_size: int, q: int, store_L: int) -> list[list[int]]:
    """Coefficient rows over [pool ids | message coordinates] for one query payload."""
    tag = payload[0]
    width = pool_size + n_coords
    rows: list[list[int]] = []
    if tag == table_scheme.TABLE_QUERY_TAG:
        view = _parse_table_wire(payload)
        for pid in view.plain_ids:
            row = [0] * width
            row[pid] = 1
            rows.append(row)
        for terms, pid in zip(view.sums, view.sum_ids):
            row = [0] * width
            row[pid] = 1
            for m, idx in terms:
                col = pool_size + m * store_L + idx
                row[col] = (row[col] + 1) % q
            rows.append(row)
    elif tag == block_scheme.BLOCK_QUERY_TAG:
        import struct as _s

        off = 1
        (n,) = _s.unpack_from("<I", payload, off)
        off += 4
        for _ in range(n):
            (cr_id,) = _s.unpack_from("<I", payload, off)
            off += 4
            (veclen,) = _s.unpack_from("<I", payload, off)
            vec = payload[off + 4 : off + 4 + veclen]
            off += 4 + veclen
            row = [0] * width
            row[cr_id] = 1
            for c, coeff in enumerate(vec):
                row[pool_size + c] = coeff % q
            rows.append(row)
    else:
        raise ParamError(f"cannot derive coefficients for scheme tag {tag}")
    return rows


def recoverable_coordinates(
    wire_payloads: list[bytes], n_coords: int, pool_size: int, q: int, store_L: int
) -> frozenset[int]:
    """Gaussian elimination over the full client view.

    Unknowns are every message coordinate and every pool symbol.  A message
    coordinate is recoverable iff its indicator functional lies in the span
    of rows that eliminate all pool unknowns (pool columns are ordered first,
    so echelon rows pivoting past them carry no randomness).
    """
    field = Field(q)
    rows: list[list[int]] = []
    for payload in wire_payloads:
        rows.extend(_rows_from_wire(payload, n_coords, pool_size, q, store_L))

    width = pool_size + n_coords
    basis: list[list[int]] = []  # echelon rows, pivot column strictly increasing
    pivots: list[int] = []
    for row in rows:
        row = row[:]
        for b, pcol in zip(basis, pivots):
            if row[pcol]:
                factor = row[pcol] * field.inv(b[pcol]) % q
                row = [(r - factor * bb) % q for r, bb in zip(row, b)]
        lead = next((c for c in range(width) if row[c]), None)
        if lead is None:
            continue
        ins = 0
        while ins < len(pivots) and pivots[ins] < lead:
            ins += 1
        basis.insert(ins, row)
        pivots.insert(ins, lead)

    msg_rows = [b for b, p in zip(basis, pivots) if p >= pool_size]
    msg_pivots = [p - pool_size for p in pivots if p >= pool_size]
    coord_rows = [r[pool_size:] for r in msg_rows]

    recoverable = set()
    for t in range(n_coords):
        vec = [0] * n_coords
        vec[t] = 1
        for b, pcol in zip(coord_rows, msg_pivots):
            if vec[pcol]:
                factor = vec[pcol] * field.inv(b[pcol]) % q
                vec = [(v - factor * bb) % q for v, bb in zip(vec, b)]
        if not any(vec):
            recoverable.add(t)
    return frozenset(recoverable)


def symbolic_leakage_table(table: table_scheme.QueryTable) -> LeakageReport:
    """Recoverable coordinates of a table run must be exactly the retrieved ones."""
    n_coords = table.K * table.L_store
    payloads = table.wire_queries()
    rec = recoverable_coordinates(payloads, n_coords, table.pool_size, table.q, table.L_store)
    expected = frozenset(
        m * table.L_store + table.msg_perm[m][idx]
        for m in table.desired
        for idx in range(table.msg_fresh[m])
    )
    return LeakageReport(rec, expected)


def symbolic_leakage_block(plan: block_scheme.BlockPlan) -> LeakageReport:
    params = plan.params
    n_coords = params.K * params.L
    payloads = plan.wire_queries()
    rec = recoverable_coordinates(payloads, n_coords, plan.pool_size_required(), params.q, params.L)
    expected = frozenset(c for blk in plan.coords for c in blk)
    return LeakageReport(rec, expected)


def audit_table_db_privacy(
    params: SchemeParams,
    mutant: str | None = None,
    budget: int = DEFAULT_BUDGET,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    reps: int | None = None,
) -> Verdict:
    """Posterior-equals-prior for undesired symbols, via exact elimination.

    For every sampled strategy draw (the client knows its own draw, so the
    check conditions on it), a zero-leakage span certifies the exact
    uniformity of the posterior: the view pins message functionals only
    inside the desired span, and fibers of a linear map all have one size.
    Hidden-randomness removal is modeled by giving the undesired sums'
    masking symbols publicly known (zero) values, which adds their rows to
    the recoverable span.
    """
    K, P, N = params.K, params.P, params.N
    for seed in seeds:
        for desired in combinations(range(K), P):
            table = table_scheme.build_query_table(params, desired, Random(seed), reps=reps)
            payloads = table.wire_queries()
            n_coords = K * table.L_store
            pool_size = table.pool_size
            if mutant == TABLE_MUTANT_NO_HIDDEN_CR:
                # Hidden symbols made public: append rows revealing them.
                extra = []
                for db in range(N):
                    for spec in table.sums[db]:
                        if spec.cr_kind == table_scheme.CR_HIDDEN:
                            row_payload = _hidden_reveal_payload(table, spec)
                            extra.append(row_payload)
                payloads = payloads + extra
            rec = recoverable_coordinates(payloads, n_coords, pool_size, params.q, table.L_store)
            expected = frozenset(
                m * table.L_store + table.msg_perm[m][idx]
                for m in table.desired
                for idx in range(table.msg_fresh[m])
            )
            if rec != expected:
                extra_coords = rec - expected
                return Verdict(
                    False,
                    Fraction(1),
                    f"client view pins {len(extra_coords)} coordinates outside the desired set",
                )
    return Verdict(True, Fraction(0), "posterior of undesired symbols equals the prior (zero leakage span)")


def _hidden_reveal_payload(table: table_scheme.QueryTable, spec: table_scheme.SumSpec) -> bytes:
    """A synthetic plain download of one hidden symbol (mutant modeling)."""
    import struct as _s

    out = [_s.pack("<B", table_scheme.TABLE_QUERY_TAG), _s.pack("<I", 1)]
    out.append(_s.pack("<I", table.pool_perm[spec.cr_slot]))
    out.append(_s.pack("<I", 0))
    return b"".join(out)


def audit_table_db_privacy_enumerated(
    params: SchemeParams,
    mutant: str | None = None,
    budget: int = DEFAULT_BUDGET,
    seeds: tuple[int, ...] = (0, 1, 2),
    reps: int | None = None,
) -> Verdict:
    """Literal posterior check by enumerating every (W, S) pair, for instances
    whose q**(K*L + pool) fits the budget (conditioning on the strategy draw)."""
    K, P, N, q = params.K, params.P, params.N, params.q
    probe = table_scheme.build_query_table(params, tuple(range(P)), Random(0), reps=reps)
    n_coords = K * probe.L_store
    _check_budget((q**n_coords) * (q**probe.pool_size) * len(seeds), budget)

    for seed in seeds:
        desired = tuple(range(P))
        table = table_scheme.build_query_table(params, desired, Random(seed), reps=reps)
        wires = table.wire_queries()
        undesired = [m for m in range(K) if m not in set(desired)]
        groups: dict = {}
        for w_flat in product(range(q), repeat=n_coords):
            store = MessageStore(q, [list(w_flat[m * table.L_store : (m + 1) * table.L_store]) for m in range(K)])
            for s_vals in product(range(q), repeat=table.pool_size):
                pool = CommonRandomnessPool(q, list(s_vals))
                if mutant == TABLE_MUTANT_NO_HIDDEN_CR:
                    syms = list(s_vals)
                    for db in range(N):
                        for spec in table.sums[db]:
                            if spec.cr_kind == table_scheme.CR_HIDDEN:
                                syms[table.pool_perm[spec.cr_slot]] = 0
                    pool = CommonRandomnessPool(q, syms)
                answers = tuple(
                    tuple(table_scheme.answer_wire_query(wires[db], store, pool)) for db in range(N)
                )
                wbar = tuple(w_flat[m * table.L_store : (m + 1) * table.L_store] for m in undesired)
                groups.setdefault(answers, {})
                groups[answers][wbar] = groups[answers].get(wbar, 0) + 1

        expected = q ** (len(undesired) * table.L_store)
        for counts in groups.values():
            if len(counts) != expected or len(set(counts.values())) != 1:
                return Verdict(False, Fraction(1), "posterior of undesired messages differs from prior")
    return Verdict(True, Fraction(0), "enumerated posterior equals prior for all strategy draws checked")


# ---------------------------------------------------------------------------
# Reliability
# ---------------------------------------------------------------------------


def audit_reliability_table(params: SchemeParams, trials: int, seed: int = 0, reps: int | None = None) -> Verdict:
    rng = Random(seed)
    K, P, N, q = params.K, params.P, params.N, params.q
    for _ in range(trials):
        desired = tuple(sorted(rng.sample(range(K), P)))
        table = table_scheme.build_query_table(params, desired, Random(rng.randrange(1 << 30)), reps=reps)
        store = MessageStore.generate(K, table.L_store, q, seed=rng.randrange(1 << 30))
        pool = CommonRandomnessPool.generate(table.pool_size, q, seed=rng.randrange(1 << 30))
        answers = [table_scheme.answer_queries(table, db, store, pool) for db in range(N)]
        decoded = table_scheme.decode(table, answers)
        for m in desired:
            for pos, val in decoded.values[m].items():
                if val != store.messages[m][pos]:
                    return Verdict(False, Fraction(1), f"decode mismatch at message {m} position {pos}")
    return Verdict(True, Fraction(0), f"{trials} trials decoded exactly")


def audit_reliability_block(params: SchemeParams, trials: int, seed: int = 0) -> Verdict:
    rng = Random(seed)
    K, P, N, L, q = params.K, params.P, params.N, params.L, params.q
    for _ in range(trials):
        desired = tuple(sorted(rng.sample(range(K), P)))
        plan = block_scheme.plan_blocks(params, desired, Random(rng.randrange(1 << 30)))
        store = MessageStore.generate(K, L, q, seed=rng.randrange(1 << 30))
        pool = CommonRandomnessPool.generate(plan.pool_size_required(), q, seed=rng.randrange(1 << 30))
        answers = [block_scheme.answer_wire_query(plan.wire_query(db), store, pool) for db in range(N)]
        coords = block_scheme.decode_blocks(plan, answers)
        for m in desired:
            for s in range(L):
                if coords[m * L + s] != store.messages[m][s]:
                    return Verdict(False, Fraction(1), f"decode mismatch at message {m} symbol {s}")
    return Verdict(True, Fraction(0), f"{trials} trials decoded exactly")
