"""Set intersection over replicated databases without revealing anything else.

Each entity stores its set as a length-K incidence vector over F_2,
replicated across its databases.  The cheaper side initiates: it privately
retrieves the bit X_other(j) for every j in its own set via the one-round
linear scheme (message length 1), and keeps exactly the positions that came
back 1.  Neither side learns anything beyond the intersection: the
initiator's queries hide its set from every single database, and the masked
answers pin down only the probed bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from random import Random

from . import block_scheme, table_scheme, transport
from .field import DOMAIN_CLIENT, domain_rng
from .params import InfeasibleError, ParamError, SchemeParams, psi_optimal_cost
from .storage import CommonRandomnessPool, MessageStore


@dataclass(frozen=True)
class EntityConfig:
    """One participant: its public shape and its private elements.

    The set size is public; the elements are private.  ``gen_prob`` only
    matters for random instance generation.
    """

    entity_id: int  # 1 or 2
    K: int
    n_databases: int
    elements: frozenset[int]
    gen_prob: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.entity_id not in (1, 2):
            raise ParamError("entity_id must be 1 or 2")
        if any(not 0 <= e < self.K for e in self.elements):
            raise ParamError("set elements must lie in [0, K)")
        if self.n_databases < 1:
            raise ParamError("need at least one database")

    @property
    def size(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class IncidenceVector:
    """Length-K bit vector marking set membership; a sufficient statistic for the set."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ParamError("incidence bits must be 0 or 1")

    @property
    def K(self) -> int:
        return len(self.bits)

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def elements(self) -> frozenset[int]:
        return frozenset(j for j, b in enumerate(self.bits) if b)

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_string(cls, s: str) -> "IncidenceVector":
        return cls(tuple(int(c) for c in s.strip()))


def to_incidence(elements, K: int) -> IncidenceVector:
    elements = set(elements)
    if any(not 0 <= e < K for e in elements):
        raise ParamError("set elements must lie in [0, K)")
    return IncidenceVector(tuple(1 if j in elements else 0 for j in range(K)))


def generate_set(K: int, prob, rng: Random) -> frozenset[int]:
    """Each field element joins independently with the given probability.

    The probability is handled as an exact rational so generation stays
    integer-only and reproducible.
    """
    prob = Fraction(prob).limit_denominator(10**6)
    if not 0 < prob < 1:
        raise ParamError("inclusion probability must lie strictly between 0 and 1")
    return frozenset(
        j for j in range(K) if rng.randrange(prob.denominator) < prob.numerator
    )


@dataclass
class PsiResult:
    """Outcome of one intersection run."""

    intersection: frozenset[int]
    initiator: int
    download_symbols: int
    optimal_cost: int
    transcript: transport.Transcript

    @property
    def cardinality(self) -> int:
        return len(self.intersection)


def _direction_cost(p_init: int, k: int, n_resp: int) -> int | None:
    """Download cost if this side initiates; None when infeasible."""
    if p_init == 0:
        return 0
    if p_init == k:
        return k  # download everything from one database, no randomness needed
    if n_resp < 2:
        return None
    return -(-p_init * n_resp // (n_resp - 1))


def choose_initiator(e1: EntityConfig, e2: EntityConfig) -> tuple[int, int]:
    """(initiator id, expected download cost); ties go to entity 1.

    For 1 <= P <= K-1 in both directions this is exactly
    min(ceil(P1*N2/(N2-1)), ceil(P2*N1/(N1-1))); empty and full sets take
    the degenerate no-query / download-all paths.
    """
    if e1.K != e2.K:
        raise ParamError("entities must agree on the field size K")
    c1 = _direction_cost(e1.size, e1.K, e2.n_databases)
    c2 = _direction_cost(e2.size, e2.K, e1.n_databases)
    options = [(c, ent) for c, ent in ((c1, 1), (c2, 2)) if c is not None]
    if not options:
        raise InfeasibleError("both entities have a single database; no private scheme exists")
    options.sort(key=lambda t: (t[0], t[1]))
    return options[0][1], options[0][0]


def _entity_servers(entity: EntityConfig) -> list[transport.DatabaseServer]:
    bits = to_incidence(entity.elements, entity.K).bits
    store = MessageStore.from_bits(list(bits))
    info = {"entity": entity.entity_id, "K": entity.K, "P": entity.size, "N": entity.n_databases}
    return transport.make_entity_servers(store, entity.n_databases, info)


def run_psi(
    e1: EntityConfig,
    e2: EntityConfig,
    *,
    backend: str = "sim",
    seed_client: int = 0,
    seed_cr: int = 0,
    forward_result: bool = True,
    faults: transport.FaultPlan | None = None,
) -> PsiResult:
    """Execute one full intersection run over the chosen backend.

    The initiator's queries are a deterministic function of its own set and
    ``seed_client`` alone; the responder's set enters only through the
    answers.  The result is identical across the simulated and TCP backends
    for the same seeds.
    """
    initiator_id, optimal_cost = choose_initiator(e1, e2)
    init, resp = (e1, e2) if initiator_id == 1 else (e2, e1)
    servers = _entity_servers(resp)

    if backend == "sim":
        sim = transport.SimBackend(servers, faults)
        return _run(init, resp, servers, sim, seed_client, seed_cr, optimal_cost, forward_result)
    if backend == "tcp":
        if faults is not None:
            raise ParamError("fault injection is only supported on the simulated backend")
        with transport.TcpServerPool(servers) as pool:
            tcp = transport.TcpBackend(pool.addresses)
            try:
                return _run(init, resp, servers, tcp, seed_client, seed_cr, optimal_cost, forward_result)
            finally:
                tcp.close()
    raise ParamError(f"unknown backend {backend!r}")


def _run(
    init: EntityConfig,
    resp: EntityConfig,
    servers: list[transport.DatabaseServer],
    backend,
    seed_client: int,
    seed_cr: int,
    optimal_cost: int,
    forward_result: bool,
) -> PsiResult:
    client = transport.Client(backend)
    peer_info = client.setup_info()
    if peer_info.get("K") != init.K:
        raise ParamError("setup exchange reports a different field size")

    K = init.K
    desired = tuple(sorted(init.elements))
    meta = {
        "scheme": "psi",
        "K": K,
        "initiator": init.entity_id,
        "P_initiator": len(desired),
        "N_responder": resp.n_databases,
        "seed_client": seed_client,
        "seed_cr": seed_cr,
        "q": 2,
        "timestamp": transport.now_stamp(),
    }

    if len(desired) == 0:
        bits: dict[int, int] = {}
    elif len(desired) == K:
        body = table_scheme.download_all_wire_query()
        symbols = client.query(0, body)
        if len(symbols) != K:
            raise table_scheme.ProtocolFault("download-all answer has wrong length")
        bits = {j: symbols[j] for j in range(K)}
    else:
        params = SchemeParams(K=K, P=len(desired), N=resp.n_databases, L=1, q=2)
        rng = domain_rng(seed_client, DOMAIN_CLIENT)
        plan = block_scheme.plan_blocks(params, desired, rng)
        required = plan.pool_size_required()
        pool = CommonRandomnessPool.generate(required, 2, seed_cr)
        transport.provision_cr(servers, pool, required)
        answers = client.query_all(plan.wire_queries())
        bits = block_scheme.decode_blocks(plan, answers)

    intersection = frozenset(j for j in desired if bits.get(j, 0) == 1)

    if forward_result:
        payload = ",".join(str(j) for j in sorted(intersection)).encode()
        client.forward_result(payload)

    transcript = transport.Transcript(meta=meta, records=client.records)
    return PsiResult(
        intersection=intersection,
        initiator=init.entity_id,
        download_symbols=client.meter.total,
        optimal_cost=optimal_cost,
        transcript=transcript,
    )


def run_psi_remote(
    initiator: EntityConfig,
    addresses: list[tuple[str, int]],
    *,
    seed_client: int = 0,
    forward_result: bool = True,
) -> PsiResult:
    """Intersect against databases served elsewhere (see the ``psi serve`` CLI).

    The local entity always initiates; the responder must have provisioned a
    pool large enough for ceil(P*1/(N-1)) shared symbols, else its databases
    refuse the queries.  The responder's public shape comes from the setup
    exchange.
    """
    backend = transport.TcpBackend(addresses)
    try:
        client = transport.Client(backend)
        info = client.setup_info()
        if info.get("K") != initiator.K:
            raise ParamError("served databases report a different field size")
        n_resp = len(addresses)
        desired = tuple(sorted(initiator.elements))
        cost = _direction_cost(len(desired), initiator.K, n_resp)
        if cost is None:
            raise InfeasibleError("responder must run at least two databases")
        meta = {
            "scheme": "psi",
            "K": initiator.K,
            "initiator": initiator.entity_id,
            "P_initiator": len(desired),
            "N_responder": n_resp,
            "seed_client": seed_client,
            "seed_cr": None,
            "q": 2,
            "timestamp": transport.now_stamp(),
        }
        if len(desired) == 0:
            bits: dict[int, int] = {}
        elif len(desired) == initiator.K:
            symbols = client.query(0, table_scheme.download_all_wire_query())
            bits = {j: symbols[j] for j in range(initiator.K)}
        else:
            params = SchemeParams(K=initiator.K, P=len(desired), N=n_resp, L=1, q=2)
            plan = block_scheme.plan_blocks(params, desired, domain_rng(seed_client, DOMAIN_CLIENT))
            answers = client.query_all(plan.wire_queries())
            bits = block_scheme.decode_blocks(plan, answers)
        intersection = frozenset(j for j in desired if bits.get(j, 0) == 1)
        if forward_result:
            client.forward_result(",".join(str(j) for j in sorted(intersection)).encode())
        transcript = transport.Transcript(meta=meta, records=client.records)
        return PsiResult(
            intersection=intersection,
            initiator=initiator.entity_id,
            download_symbols=client.meter.total,
            optimal_cost=cost,
            transcript=transcript,
        )
    finally:
        backend.close()


def expected_cost(e1: EntityConfig, e2: EntityConfig) -> int:
    """Cost the chosen direction should incur; equals the two-sided optimum."""
    return choose_initiator(e1, e2)[1]


def theorem_cost(P1: int, N1: int, P2: int, N2: int) -> int:
    """Pure two-sided formula, valid when both set sizes are in [1, K-1]."""
    return psi_optimal_cost(P1, N1, P2, N2)[0]
