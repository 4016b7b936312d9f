"""One-round linear retrieval for fixed message length (the layer PSI runs).

The desired coordinates of the flattened K*L store are split into
ceil(P*L/(N-1)) blocks of width at most N-1.  For block j the querying side
draws one fresh uniform base vector c_j; one database answers
<c_j, W> + s_j while each of the block's probe databases answers
<c_j + e_t, W> + s_j for its assigned desired coordinate t.  Subtracting the
base answer from a probe answer yields W[t]; the shared symbol s_j (one per
block, never revealed) blocks everything else.

Costs are exact: P*L + #blocks = ceil(N*P*L/(N-1)) answers downloaded and
#blocks = ceil(P*L/(N-1)) shared symbols consumed.  Every vector any single
database sees is uniform, so its view is independent of the desired set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from random import Random

from .field import Field, SymbolVector, sample_uniform
from .params import InfeasibleError, ParamError, SchemeParams, lspir_cost
from .storage import CommonRandomnessPool, MessageStore

BLOCK_QUERY_TAG = 2


@dataclass(frozen=True)
class BlockQuery:
    """One query vector for one database: coefficients plus the block's pool slot."""

    block: int
    db: int
    vector: SymbolVector
    cr_id: int
    probe_coord: int | None  # desired coordinate this probe targets; None for the base


@dataclass
class BlockPlan:
    """Client-side plan: block layout, per-database query lists, decode map."""

    params: SchemeParams
    desired: tuple[int, ...]  # message indices
    coords: list[list[int]]  # per block, the desired global coordinates covered
    base_db: list[int]  # per block, which database answers the bare base
    queries: list[list[BlockQuery]]  # per database, in block order

    @property
    def n_blocks(self) -> int:
        return len(self.coords)

    @property
    def total_queries(self) -> int:
        return sum(len(qs) for qs in self.queries)

    def pool_size_required(self) -> int:
        return self.n_blocks

    def wire_query(self, db: int) -> bytes:
        out = [struct.pack("<B", BLOCK_QUERY_TAG), struct.pack("<I", len(self.queries[db]))]
        for bq in self.queries[db]:
            out.append(struct.pack("<I", bq.cr_id))
            out.append(bq.vector.to_bytes())
        return b"".join(out)

    def wire_queries(self) -> list[bytes]:
        return [self.wire_query(db) for db in range(self.params.N)]


def plan_blocks(params: SchemeParams, desired, rng: Random) -> BlockPlan:
    """Lay out blocks and draw the query vectors for one retrieval run.

    The assignment of the P*L desired coordinates to block slots is uniformly
    shuffled (part of the private strategy); which database serves each base
    rotates round-robin so downloads stay balanced.
    """
    K, P, N, L, q = params.K, params.P, params.N, params.L, params.q
    if N < 2:
        raise InfeasibleError("at least two databases are required")
    desired = tuple(sorted(set(desired)))
    if len(desired) != P or any(not 0 <= m < K for m in desired):
        raise ParamError(f"desired must be P={P} distinct messages in [0, {K})")
    if P == K:
        raise ParamError("P == K is served by download_all, not by block queries")

    field = Field(q)
    coords_flat = [m * L + sym for m in desired for sym in range(L)]
    rng.shuffle(coords_flat)

    width = N - 1
    coords = [coords_flat[i : i + width] for i in range(0, len(coords_flat), width)]
    base_db: list[int] = []
    queries: list[list[BlockQuery]] = [[] for _ in range(N)]
    for j, block_coords in enumerate(coords):
        base = j % N
        base_db.append(base)
        base_vec = sample_uniform(rng, K * L, field)
        queries[base].append(BlockQuery(j, base, base_vec, j, None))
        probes = [(base + 1 + i) % N for i in range(len(block_coords))]
        for db, t in zip(probes, block_coords):
            elems = list(base_vec.elems)
            elems[t] = (elems[t] + 1) % q
            queries[db].append(BlockQuery(j, db, SymbolVector(field, elems), j, t))

    plan = BlockPlan(params=params, desired=desired, coords=coords, base_db=base_db, queries=queries)
    D, HS = lspir_cost(P, N, L)
    assert plan.total_queries == D and plan.n_blocks == HS
    return plan


def answer_block(vector: SymbolVector, store: MessageStore, cr_symbol: int) -> int:
    """<vector, flattened store> + cr, in F_q."""
    if len(vector) != store.K * store.L:
        raise ParamError(f"query vector length {len(vector)} != K*L = {store.K * store.L}")
    q = store.q
    acc = 0
    flat = store.flat()
    for c, w in zip(vector.elems, flat):
        acc += c * w
    return (acc + cr_symbol) % q


def answer_wire_query(payload: bytes, store: MessageStore, pool: CommonRandomnessPool) -> list[int]:
    from .table_scheme import ProtocolFault  # shared fault type

    field = Field(store.q)
    view = memoryview(payload)
    off = 1
    (n,) = struct.unpack_from("<I", view, off)
    off += 4
    out: list[int] = []
    flat = store.flat()
    for _ in range(n):
        (cr_id,) = struct.unpack_from("<I", view, off)
        off += 4
        (veclen,) = struct.unpack_from("<I", view, off)
        if veclen != store.K * store.L:
            raise ProtocolFault(f"query vector length {veclen} != {store.K * store.L}")
        vec = bytes(view[off + 4 : off + 4 + veclen])
        if len(vec) != veclen:
            raise ProtocolFault("truncated query vector")
        off += 4 + veclen
        if cr_id >= len(pool.symbols):
            raise ProtocolFault(f"randomness slot {cr_id} outside the provisioned pool")
        acc = pool.symbols[cr_id]
        for c, w in zip(vec, flat):
            acc += c * w
        out.append(acc % store.q)
    if off != len(payload):
        raise ProtocolFault("trailing bytes in query payload")
    return out


def decode_blocks(plan: BlockPlan, answers: list[list[int]]) -> dict[int, int]:
    """Recover the desired coordinates: probe answer minus base answer, per block.

    Returns {global coordinate: symbol}.  Answer strings must contain one
    symbol per issued query, in issue order.
    """
    from .table_scheme import ProtocolFault

    N, q = plan.params.N, plan.params.q
    if len(answers) != N:
        raise ProtocolFault(f"expected {N} answer strings, got {len(answers)}")
    for db in range(N):
        if len(answers[db]) != len(plan.queries[db]):
            raise ProtocolFault(f"answer count mismatch at database {db}")
        if any(not 0 <= v < q for v in answers[db]):
            raise ProtocolFault(f"answer symbol outside F_{q} at database {db}")

    by_query: dict[tuple[int, int], int] = {}
    for db in range(N):
        for bq, v in zip(plan.queries[db], answers[db]):
            by_query[(bq.block, db)] = v

    out: dict[int, int] = {}
    for j, block_coords in enumerate(plan.coords):
        base_val = by_query[(j, plan.base_db[j])]
        probes = [(plan.base_db[j] + 1 + i) % N for i in range(len(block_coords))]
        for db, t in zip(probes, block_coords):
            out[t] = (by_query[(j, db)] - base_val) % q
    assert len(out) == plan.params.P * plan.params.L
    return out


def decoded_messages(plan: BlockPlan, coords: dict[int, int]) -> dict[int, list[int]]:
    """Regroup decoded coordinates into per-message symbol lists."""
    L = plan.params.L
    return {m: [coords[m * L + s] for s in range(L)] for m in plan.desired}
