"""Capacity-achieving joint retrieval via per-database k-sum query tables.

A k-sum is one downloaded symbol formed by adding one symbol from each of k
distinct messages, plus one shared-randomness symbol.  Round k downloads
k-sums; the stage profile (how many full combinatorial sweeps each round
gets) comes from :func:`privset.params.alpha_profile`.

Construction rules, per database:

* every k-subset of messages appears once per stage of round k;
* a sum with no desired message is *pure*: all its symbols are fresh and it
  is masked by a hidden randomness symbol the querying side never sees;
* a sum made only of desired messages carries one fresh symbol, reuses
  already-recovered symbols for the other members, and is masked by a
  randomness symbol served plainly by another database;
* a sum mixing desired and undesired messages carries one fresh desired
  symbol (plus already-recovered desired ones) and embeds, verbatim, a pure
  sum downloaded at another database - subtracting that download unmasks the
  fresh symbol.

Each pure sum is consumed exactly once at each of the other N-1 databases,
which is what the stage profile's balance identity guarantees is possible.

The querying side's private randomness is one uniform permutation of symbol
positions per message plus one uniform relabeling of the randomness pool;
these make the per-database view independent of which messages are desired.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import combinations
from math import comb
from random import Random

from .params import (
    AlphaProfile,
    CostLedger,
    ParamError,
    SchemeParams,
    alpha_profile,
    cost_ledger,
    repetition_factor,
)
from .storage import CommonRandomnessPool, MessageStore

TABLE_QUERY_TAG = 1
DOWNLOAD_ALL_TAG = 3

CR_DOWNLOADED = "downloaded"
CR_HIDDEN = "hidden"
CR_SIDEINFO = "sideinfo"


class ProtocolFault(RuntimeError):
    """Malformed or inconsistent protocol data (bad reference, bad answer shape)."""


@dataclass(frozen=True)
class SumSpec:
    """One downloaded sum: its terms, randomness slot, and decode bookkeeping."""

    round_k: int
    stage: int
    subset: tuple[int, ...]
    terms: tuple[tuple[int, int], ...]  # (message, structural index), sorted by message
    cr_slot: int
    cr_kind: str
    ref: tuple[int, int] | None = None  # (database, sum position) of the embedded pure sum
    fresh: tuple[int, int] | None = None
    reused: tuple[tuple[int, int], ...] = ()


@dataclass
class QueryTable:
    """Full client-side plan for one protocol run plus the wire randomization."""

    K: int
    P: int
    N: int
    q: int
    desired: tuple[int, ...]
    reps: int  # effective stage multiplier (repetition factor or override)
    profile: AlphaProfile
    ledger: CostLedger
    plain_slots: list[list[int]]  # per database, canonical pool slots served plainly
    plain_rounds: list[list[int]]  # round that allocated each plain slot (rendering)
    sums: list[list[SumSpec]]  # per database, in round/stage/subset order
    msg_fresh: list[int]  # fresh symbol count per message
    L_store: int
    pool_size: int
    msg_perm: list[list[int]]  # structural index -> store position, per message
    pool_perm: list[int]  # canonical slot -> pool id

    @property
    def multiplier(self) -> int:
        """Effective count of rational repetitions: reps times the profile scale."""
        return self.reps * self.profile.scale

    @property
    def total_downloads(self) -> int:
        return sum(len(p) + len(s) for p, s in zip(self.plain_slots, self.sums))

    @property
    def total_desired_symbols(self) -> int:
        return sum(self.msg_fresh[m] for m in self.desired)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.total_desired_symbols, self.total_downloads)

    def stages(self, k: int) -> int:
        return self.reps * self.profile.alpha[k - 1]

    def wire_query(self, db: int) -> bytes:
        """Binary query payload for one database (permuted indices, relabeled slots)."""
        out = [struct.pack("<B", TABLE_QUERY_TAG)]
        plains = self.plain_slots[db]
        out.append(struct.pack("<I", len(plains)))
        for slot in plains:
            out.append(struct.pack("<I", self.pool_perm[slot]))
        sums = self.sums[db]
        out.append(struct.pack("<I", len(sums)))
        for s in sums:
            out.append(struct.pack("<B", len(s.terms)))
            for msg, idx in s.terms:
                out.append(struct.pack("<BI", msg, self.msg_perm[msg][idx]))
            out.append(struct.pack("<I", self.pool_perm[s.cr_slot]))
        return b"".join(out)

    def wire_queries(self) -> list[bytes]:
        return [self.wire_query(db) for db in range(self.N)]


def pool_size_required(K: int, P: int, N: int, reps: int, profile: AlphaProfile | None = None) -> int:
    """Distinct randomness symbols one run consumes across all databases.

    The builder's stage counts are ``reps * alpha`` with the integerized
    profile, so any integerization scale multiplies the budget too.
    """
    if profile is None:
        profile = alpha_profile(K, P, N)
    ledger = cost_ledger(K, P, N, profile)
    total = reps * profile.scale * N * ledger.randomness
    if total.denominator != 1:
        raise ParamError("repetition count does not yield an integer randomness budget")
    return int(total)


def build_query_table(
    params: SchemeParams,
    desired: set[int] | tuple[int, ...] | list[int],
    rng: Random,
    reps: int | None = None,
) -> QueryTable:
    """Construct the per-database query tables for one retrieval run.

    ``params.L`` is ignored: this scheme fixes the message length itself
    (``table.L_store`` symbols per message).  ``reps`` overrides the
    repetition factor; the default restores per-message symmetry, while
    e.g. ``reps=1`` gives the smallest (possibly asymmetric) run.
    """
    K, P, N, q = params.K, params.P, params.N, params.q
    if P == K:
        raise ParamError("P == K is served by download_all, not by query tables")
    desired = tuple(sorted(set(desired)))
    if len(desired) != P or any(not 0 <= m < K for m in desired):
        raise ParamError(f"desired must be P={P} distinct messages in [0, {K})")

    profile = alpha_profile(K, P, N)
    if reps is None:
        reps = repetition_factor(K, P, N, profile)
    ledger = cost_ledger(K, P, N, profile)
    desired_set = set(desired)

    plain_slots: list[list[int]] = [[] for _ in range(N)]
    plain_rounds: list[list[int]] = [[] for _ in range(N)]
    sums: list[list[SumSpec]] = [[] for _ in range(N)]
    msg_fresh = [0] * K
    next_slot = 0

    # pure_supply[(consumer, subset)] -> deque of (origin db, position); each pure
    # sum is consumable once at each other database.
    pure_supply: dict[tuple[int, tuple[int, ...]], deque] = {}
    # reuse[(consumer, msg)] -> deque of structural indices recovered at other
    # databases in earlier rounds, not yet reused at this one.
    reuse: dict[tuple[int, int], deque] = {}

    def take_fresh(msg: int) -> tuple[int, int]:
        idx = msg_fresh[msg]
        msg_fresh[msg] += 1
        return (msg, idx)

    for k in range(1, K + 1):
        n_stages = reps * profile.alpha[k - 1]
        if n_stages == 0:
            continue

        # Plainly served randomness for this round's all-desired sums.
        plain_queue: dict[int, deque] = {db: deque() for db in range(N)}
        if k <= min(P, K - P):
            quota_num = reps * comb(P, k) * profile.alpha[k - 1]
            if quota_num % (N - 1):
                raise ParamError(
                    f"round {k} randomness quota {quota_num}/{N - 1} is not an integer; "
                    "increase the repetition count"
                )
            quota = quota_num // (N - 1)
            round_plain = []
            for db in range(N):
                ids = []
                for _ in range(quota):
                    ids.append(next_slot)
                    next_slot += 1
                plain_slots[db].extend(ids)
                plain_rounds[db].extend([k] * quota)
                round_plain.append(ids)
            for consumer in range(N):
                for m in range(N):
                    if m != consumer:
                        plain_queue[consumer].extend(round_plain[m])

        round_fresh: list[tuple[int, int, int]] = []  # (origin db, msg, idx)

        for db in range(N):
            for stage in range(n_stages):
                for subset in combinations(range(K), k):
                    des = [m for m in subset if m in desired_set]
                    und = tuple(m for m in subset if m not in desired_set)
                    if not des:
                        # Pure sum: all fresh, hidden randomness.
                        terms = tuple(take_fresh(m) for m in subset)
                        slot = next_slot
                        next_slot += 1
                        spec = SumSpec(k, stage, subset, terms, slot, CR_HIDDEN)
                        pos = len(sums[db])
                        sums[db].append(spec)
                        for consumer in range(N):
                            if consumer != db:
                                pure_supply.setdefault((consumer, subset), deque()).append((db, pos))
                        continue

                    fresh_msg = min(des, key=lambda m: (msg_fresh[m], m))
                    fresh = take_fresh(fresh_msg)
                    round_fresh.append((db, fresh[0], fresh[1]))
                    reused = []
                    for m in des:
                        if m == fresh_msg:
                            continue
                        queue = reuse.get((db, m))
                        if not queue:
                            raise ProtocolFault(
                                f"no recovered symbol of message {m} available for reuse at database {db}"
                            )
                        reused.append((m, queue.popleft()))
                    if und:
                        supply = pure_supply.get((db, und))
                        if not supply:
                            raise ProtocolFault(
                                f"no pure sum over {und} available for database {db} in round {k}"
                            )
                        origin, pos = supply.popleft()
                        ref_spec = sums[origin][pos]
                        terms = tuple(sorted([fresh] + reused + list(ref_spec.terms)))
                        spec = SumSpec(
                            k, stage, subset, terms, ref_spec.cr_slot, CR_SIDEINFO,
                            ref=(origin, pos), fresh=fresh, reused=tuple(reused),
                        )
                    else:
                        queue = plain_queue[db]
                        if not queue:
                            raise ProtocolFault(
                                f"no plainly served randomness left for database {db} in round {k}"
                            )
                        slot = queue.popleft()
                        terms = tuple(sorted([fresh] + reused))
                        spec = SumSpec(
                            k, stage, subset, terms, slot, CR_DOWNLOADED,
                            fresh=fresh, reused=tuple(reused),
                        )
                    sums[db].append(spec)

        # Symbols recovered this round become reusable side information at the
        # other databases from the next round on.
        for origin, msg, idx in round_fresh:
            for consumer in range(N):
                if consumer != origin:
                    reuse.setdefault((consumer, msg), deque()).append(idx)

    L_store = max(msg_fresh)
    pool_size = next_slot
    expected_pool = pool_size_required(K, P, N, reps, profile)
    if pool_size != expected_pool:
        raise ProtocolFault(f"allocated {pool_size} randomness slots, ledger says {expected_pool}")

    msg_perm = []
    for _ in range(K):
        perm = list(range(L_store))
        rng.shuffle(perm)
        msg_perm.append(perm)
    pool_perm = list(range(pool_size))
    rng.shuffle(pool_perm)

    return QueryTable(
        K=K, P=P, N=N, q=q, desired=desired, reps=reps, profile=profile, ledger=ledger,
        plain_slots=plain_slots, plain_rounds=plain_rounds, sums=sums,
        msg_fresh=msg_fresh, L_store=L_store, pool_size=pool_size,
        msg_perm=msg_perm, pool_perm=pool_perm,
    )


def answer_wire_query(payload: bytes, store: MessageStore, pool: CommonRandomnessPool) -> list[int]:
    """Evaluate one database's answer: plain slots first, then one symbol per sum."""
    q = store.q
    view = memoryview(payload)
    off = 1  # tag already dispatched
    (n_plain,) = struct.unpack_from("<I", view, off)
    off += 4
    out: list[int] = []
    for _ in range(n_plain):
        (pid,) = struct.unpack_from("<I", view, off)
        off += 4
        out.append(_pool_at(pool, pid))
    (n_sums,) = struct.unpack_from("<I", view, off)
    off += 4
    for _ in range(n_sums):
        (nterms,) = struct.unpack_from("<B", view, off)
        off += 1
        acc = 0
        for _ in range(nterms):
            msg, idx = struct.unpack_from("<BI", view, off)
            off += 5
            if msg >= store.K or idx >= store.L:
                raise ProtocolFault(f"query references missing symbol ({msg}, {idx})")
            acc += store.messages[msg][idx]
        (pid,) = struct.unpack_from("<I", view, off)
        off += 4
        out.append((acc + _pool_at(pool, pid)) % q)
    if off != len(payload):
        raise ProtocolFault("trailing bytes in query payload")
    return out


def _pool_at(pool: CommonRandomnessPool, pid: int) -> int:
    if pid >= len(pool.symbols):
        raise ProtocolFault(f"randomness slot {pid} outside the provisioned pool")
    return pool.symbols[pid]


def answer_queries(table: QueryTable, db: int, store: MessageStore, pool: CommonRandomnessPool) -> list[int]:
    """Convenience in-process evaluation of database ``db``'s answer."""
    return answer_wire_query(table.wire_query(db), store, pool)


@dataclass
class DecodedMessages:
    """Recovered symbols per desired message, keyed by store position."""

    values: dict[int, dict[int, int]] = dc_field(default_factory=dict)

    def as_vector(self, msg: int, length: int) -> list[int]:
        got = self.values[msg]
        if sorted(got) != list(range(length)):
            raise ProtocolFault(f"message {msg} was only partially recovered")
        return [got[i] for i in range(length)]


def decode(table: QueryTable, answers: list[list[int]]) -> DecodedMessages:
    """Recover every desired symbol from the N answer strings.

    Walks rounds in order, subtracting plainly downloaded randomness,
    embedded pure sums, and previously recovered symbols.  Structural
    inconsistencies (wrong lengths, out-of-range symbols) raise
    ProtocolFault; they indicate a transport or replication fault.
    """
    q = table.q
    if len(answers) != table.N:
        raise ProtocolFault(f"expected {table.N} answer strings, got {len(answers)}")
    plain_vals: dict[int, int] = {}
    sum_vals: list[list[int]] = []
    for db in range(table.N):
        ans = answers[db]
        n_plain = len(table.plain_slots[db])
        if len(ans) != n_plain + len(table.sums[db]):
            raise ProtocolFault(f"answer length mismatch at database {db}")
        if any(not 0 <= v < q for v in ans):
            raise ProtocolFault(f"answer symbol outside F_{q} at database {db}")
        for slot, v in zip(table.plain_slots[db], ans[:n_plain]):
            plain_vals[slot] = v
        sum_vals.append(list(ans[n_plain:]))

    decoded: dict[tuple[int, int], int] = {}
    order = sorted(
        ((db, pos) for db in range(table.N) for pos in range(len(table.sums[db]))),
        key=lambda t: (table.sums[t[0]][t[1]].round_k, t[0], t[1]),
    )
    for db, pos in order:
        spec = table.sums[db][pos]
        if spec.cr_kind == CR_HIDDEN:
            continue
        v = sum_vals[db][pos]
        if spec.cr_kind == CR_DOWNLOADED:
            v = (v - plain_vals[spec.cr_slot]) % q
        else:
            ref_db, ref_pos = spec.ref
            v = (v - sum_vals[ref_db][ref_pos]) % q
        for term in spec.reused:
            v = (v - decoded[term]) % q
        decoded[spec.fresh] = v

    out = DecodedMessages()
    for msg in table.desired:
        perm = table.msg_perm[msg]
        out.values[msg] = {perm[idx]: decoded[(msg, idx)] for idx in range(table.msg_fresh[msg])}
    return out


def download_all(store: MessageStore) -> list[list[int]]:
    """P = K degenerate path: everything from one database, no shared randomness."""
    if store.K < 1:
        raise ParamError("store holds no messages")
    return [list(m) for m in store.messages]


def download_all_wire_query() -> bytes:
    return struct.pack("<B", DOWNLOAD_ALL_TAG)


def answer_download_all(payload: bytes, store: MessageStore, pool: CommonRandomnessPool) -> list[int]:
    if len(payload) != 1:
        raise ProtocolFault("download-all query carries no arguments")
    return store.flat()


def render_text(table: QueryTable) -> str:
    """Human-readable table: one column per database, blank line between rounds.

    Rows look like ``a7+b3+s8``; symbol and slot numbers are 1-based.  Plain
    randomness downloads are listed first, mirroring the run's answer layout.
    """

    def letter(msg: int) -> str:
        return chr(ord("a") + msg) if table.K <= 26 else f"m{msg}."

    def sum_text(spec: SumSpec) -> str:
        parts = [f"{letter(m)}{table.msg_perm[m][i] + 1}" for m, i in spec.terms]
        parts.append(f"s{table.pool_perm[spec.cr_slot] + 1}")
        return "+".join(parts)

    columns: list[list[str]] = []
    for db in range(table.N):
        rows = [f"s{table.pool_perm[slot] + 1}" for slot in table.plain_slots[db]]
        if rows:
            rows.append("")
        last_round = None
        for spec in table.sums[db]:
            if last_round is not None and spec.round_k != last_round:
                rows.append("")
            last_round = spec.round_k
            rows.append(sum_text(spec))
        columns.append(rows)

    height = max(len(c) for c in columns)
    for c in columns:
        c.extend([""] * (height - len(c)))
    widths = [max(12, max(len(r) for r in c)) for c in columns]
    header = " | ".join(f"Database {db + 1}".ljust(widths[db]) for db in range(table.N))
    sep = "-+-".join("-" * w for w in widths)
    lines = [header, sep]
    for i in range(height):
        lines.append(" | ".join(columns[db][i].ljust(widths[db]) for db in range(table.N)))
    return "\n".join(lines)
