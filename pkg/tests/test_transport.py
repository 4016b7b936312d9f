import pytest

from privset import transport
from privset.params import SchemeParams
from privset.psi import EntityConfig, run_psi
from privset.storage import CommonRandomnessPool, MessageStore
from privset.table_scheme import ProtocolFault
from privset.transport import (
    ERR_CHANNEL_SEPARATION,
    ERR_UNKNOWN_TYPE,
    MSG_ANSWER,
    MSG_CR_PROVISION,
    MSG_ERROR,
    MSG_QUERY,
    MSG_SETUP,
    DatabaseServer,
    FaultPlan,
    InsufficientRandomness,
    SimBackend,
    TcpBackend,
    TcpServerPool,
    Transcript,
    TransportError,
    decode_error,
    decode_frame,
    encode_frame,
    make_entity_servers,
    provision_cr,
    replay_answers,
)

E1 = EntityConfig(1, 10, 2, frozenset({0, 1, 2, 3}))
E2 = EntityConfig(2, 10, 2, frozenset({0, 2, 4, 5, 6, 7}))


def small_servers(n=2, bits=(1, 0, 1)):
    store = MessageStore.from_bits(list(bits))
    return make_entity_servers(store, n, {"K": len(bits), "N": n})


def test_frame_roundtrip():
    frame = encode_frame(MSG_QUERY, b"hello")
    assert frame[:4] == b"PSI1"
    assert decode_frame(frame) == (MSG_QUERY, b"hello")


def test_frame_rejects_corruption():
    frame = encode_frame(MSG_QUERY, b"hello")
    with pytest.raises(TransportError):
        decode_frame(b"XXXX" + frame[4:])
    with pytest.raises(TransportError):
        decode_frame(frame[:-1])


def test_unknown_type_gets_error_and_connection_survives():
    srv = small_servers()[0]
    mtype, payload = srv.handle_client_frame(42, b"")
    assert mtype == MSG_ERROR
    code, _ = decode_error(payload)
    assert code == ERR_UNKNOWN_TYPE
    # server still answers afterwards
    mtype, _ = srv.handle_client_frame(MSG_SETUP, b"")
    assert mtype == MSG_SETUP


def test_client_channel_rejects_randomness_provisioning():
    srv = small_servers()[0]
    mtype, payload = srv.handle_client_frame(MSG_CR_PROVISION, b"\x00" * 8)
    assert mtype == MSG_ERROR
    assert decode_error(payload)[0] == ERR_CHANNEL_SEPARATION


def test_provisioning_digests_match():
    servers = small_servers()
    pool = CommonRandomnessPool.generate(4, 2, seed=1)
    digests = provision_cr(servers, pool, 4)
    assert len(set(digests)) == 1


def test_provisioning_refuses_small_pool():
    servers = small_servers()
    pool = CommonRandomnessPool.generate(3, 2, seed=1)
    with pytest.raises(InsufficientRandomness):
        provision_cr(servers, pool, 4)


def test_provisioning_after_query_is_a_fault():
    servers = small_servers()
    pool = CommonRandomnessPool.generate(4, 2, seed=1)
    provision_cr(servers, pool, 4)
    backend = SimBackend(servers)
    client = transport.Client(backend)
    from privset.table_scheme import download_all_wire_query

    client.query(0, download_all_wire_query())
    with pytest.raises(ProtocolFault):
        servers[0].provision(pool, 4)


def test_query_replay_is_deterministic():
    servers = small_servers()
    provision_cr(servers, CommonRandomnessPool.generate(4, 2, seed=1), 4)
    srv = servers[0]
    from privset.table_scheme import download_all_wire_query

    payload = b"\x00\x00\x00\x00" + download_all_wire_query()
    first = srv.handle_client_frame(MSG_QUERY, payload)
    second = srv.handle_client_frame(MSG_QUERY, payload)
    assert first == second and first[0] == MSG_ANSWER


def test_unprovisioned_query_refused():
    servers = small_servers()
    backend = SimBackend(servers)
    client = transport.Client(backend)
    body = bytes([2]) + (1).to_bytes(4, "little") + (0).to_bytes(4, "little") + (3).to_bytes(4, "little") + bytes(3)
    with pytest.raises(InsufficientRandomness):
        client.query(0, body)


def test_sim_and_tcp_transcripts_identical():
    res_sim = run_psi(E1, E2, backend="sim", seed_client=9, seed_cr=8)
    res_tcp = run_psi(E1, E2, backend="tcp", seed_client=9, seed_cr=8)
    assert res_sim.intersection == res_tcp.intersection
    assert res_sim.transcript.records == res_tcp.transcript.records


def test_cost_meter_counts_symbols_only():
    res = run_psi(E1, E2, backend="sim", seed_client=9, seed_cr=8)
    assert res.download_symbols == 8
    raw_bytes = sum(len(a) for db in res.transcript.records for _, a in db)
    assert raw_bytes > 8  # framing/ids excluded from the meter


def test_dropped_answer_surfaces_as_error():
    faults = FaultPlan(drop={(0, 0)})
    with pytest.raises(TransportError):
        run_psi(E1, E2, backend="sim", seed_client=1, seed_cr=2, faults=faults)


def test_duplicated_answer_surfaces_as_error():
    faults = FaultPlan(duplicate={(1, 0)})
    with pytest.raises(ProtocolFault):
        run_psi(E1, E2, backend="sim", seed_client=1, seed_cr=2, faults=faults)


def test_non_collusion_each_database_sees_only_its_queries():
    servers = small_servers(3, bits=(1, 0, 1, 1))
    provision_cr(servers, CommonRandomnessPool.generate(16, 2, seed=0), 16)
    backend = SimBackend(servers)
    client = transport.Client(backend)
    from privset import block_scheme

    plan = block_scheme.plan_blocks(SchemeParams(K=4, P=2, N=3, L=1, q=2), (0, 2), __import__("random").Random(1))
    wires = plan.wire_queries()
    client.query_all(wires)
    for db, srv in enumerate(servers):
        assert srv.seen_queries == [wires[db]]
        for other in range(3):
            if other != db:
                assert wires[other] not in srv.seen_queries


def test_transcript_save_load_and_replay(tmp_path):
    res = run_psi(E1, E2, backend="sim", seed_client=3, seed_cr=4)
    path = tmp_path / "run.transcript"
    res.transcript.save(str(path))
    loaded = Transcript.load(str(path))
    assert loaded.meta["initiator"] == 1
    assert loaded.records == res.transcript.records
    assert loaded.downloaded_symbols == 8

    bits = [1, 0, 1, 0, 1, 1, 1, 1, 0, 0]
    store = MessageStore.from_bits(bits)
    pool = CommonRandomnessPool.generate(4, 2, seed=4)
    assert replay_answers(loaded, store, pool)
    other_pool = CommonRandomnessPool.generate(4, 2, seed=5)
    assert not replay_answers(loaded, store, other_pool)

    dump = loaded.dump_text()
    assert "database 0" in dump and "meta:" in dump


def test_tcp_pool_serves_setup_and_queries():
    servers = small_servers()
    provision_cr(servers, CommonRandomnessPool.generate(4, 2, seed=1), 4)
    with TcpServerPool(servers) as pool:
        backend = TcpBackend(pool.addresses)
        client = transport.Client(backend)
        info = client.setup_info()
        assert info["K"] == 3
        from privset.table_scheme import download_all_wire_query

        symbols = client.query(0, download_all_wire_query())
        assert symbols == [1, 0, 1]
        backend.close()
