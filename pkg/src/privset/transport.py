"""Wire protocol, database servers, and the simulated / TCP backends.

Each entity runs its N databases as independent servers that share nothing
but the pre-provisioned randomness pool; there is no server-to-server
channel, so non-collusion holds by construction.  The client-facing protocol
is a fixed binary framing; the randomness pool is installed through a
separate administrative path and the client connection rejects provisioning
frames outright.

The download meter counts answer field symbols only, never framing bytes,
matching how the schemes' costs are defined.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import time
from dataclasses import dataclass, field as dc_field

from . import block_scheme, table_scheme
from .storage import CommonRandomnessPool, MessageStore
from .table_scheme import ProtocolFault

MAGIC = b"PSI1"
VERSION = 1

MSG_SETUP = 1
MSG_CR_PROVISION = 2
MSG_QUERY = 3
MSG_ANSWER = 4
MSG_RESULT_FORWARD = 5
MSG_ERROR = 6

ERR_UNKNOWN_TYPE = 1
ERR_CHANNEL_SEPARATION = 2
ERR_BAD_QUERY = 3
ERR_NOT_PROVISIONED = 4

_FRAME_HDR = struct.Struct("<4sBBI")

# Scheme tag -> answer evaluator over (payload, store, pool).
QUERY_HANDLERS = {
    table_scheme.TABLE_QUERY_TAG: table_scheme.answer_wire_query,
    block_scheme.BLOCK_QUERY_TAG: block_scheme.answer_wire_query,
    table_scheme.DOWNLOAD_ALL_TAG: table_scheme.answer_download_all,
}


class TransportError(RuntimeError):
    """Lost or malformed traffic; always surfaces instead of a wrong result."""


class InsufficientRandomness(RuntimeError):
    """Provisioned pool is smaller than the scheme requires."""


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    return _FRAME_HDR.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def decode_frame(data: bytes) -> tuple[int, bytes]:
    if len(data) < _FRAME_HDR.size:
        raise TransportError("short frame")
    magic, version, msg_type, length = _FRAME_HDR.unpack_from(data)
    if magic != MAGIC:
        raise TransportError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TransportError(f"unsupported version {version}")
    if len(data) != _FRAME_HDR.size + length:
        raise TransportError("frame length mismatch")
    return msg_type, data[_FRAME_HDR.size :]


def encode_error(code: int, message: str) -> bytes:
    body = message.encode()
    return struct.pack("<H", code) + body


def decode_error(payload: bytes) -> tuple[int, str]:
    (code,) = struct.unpack_from("<H", payload)
    return code, payload[2:].decode()


def encode_answer_symbols(query_id: int, symbols: list[int]) -> bytes:
    return struct.pack("<II", query_id, len(symbols)) + bytes(symbols)


def decode_answer_symbols(payload: bytes) -> tuple[int, list[int]]:
    qid, n = struct.unpack_from("<II", payload)
    body = payload[8:]
    if len(body) != n:
        raise TransportError("answer symbol count mismatch")
    return qid, list(body)


class DatabaseServer:
    """One replica: holds the store and (after provisioning) the shared pool.

    ``handle_client_frame`` is the entire client-visible behaviour; it is a
    deterministic function of (frame, store, pool).  Answers to unknown or
    out-of-place frame types are ERROR frames and the connection survives.
    """

    def __init__(self, db_id: int, store: MessageStore, public_info: dict | None = None):
        self.db_id = db_id
        self.store = store
        self.pool: CommonRandomnessPool | None = None
        self.query_served = False
        self.public_info = public_info or {}
        self.seen_queries: list[bytes] = []  # instrumentation for non-collusion tests

    def provision(self, pool: CommonRandomnessPool, required_size: int) -> str:
        """Administrative path (entity-internal); never reachable from a client socket."""
        if self.query_served:
            raise ProtocolFault("cannot provision randomness after queries have been served")
        if len(pool) < required_size:
            raise InsufficientRandomness(
                f"pool of {len(pool)} symbols below required {required_size}"
            )
        self.pool = pool
        return pool.digest()

    def handle_client_frame(self, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        if msg_type == MSG_QUERY:
            return self._handle_query(payload)
        if msg_type == MSG_SETUP:
            return MSG_SETUP, json.dumps(self.public_info, sort_keys=True).encode()
        if msg_type == MSG_RESULT_FORWARD:
            return MSG_RESULT_FORWARD, b"ack"
        if msg_type == MSG_CR_PROVISION:
            return MSG_ERROR, encode_error(
                ERR_CHANNEL_SEPARATION, "randomness provisioning is not accepted from clients"
            )
        return MSG_ERROR, encode_error(ERR_UNKNOWN_TYPE, f"unknown message type {msg_type}")

    def _handle_query(self, payload: bytes) -> tuple[int, bytes]:
        if len(payload) < 5:
            return MSG_ERROR, encode_error(ERR_BAD_QUERY, "query too short")
        (query_id,) = struct.unpack_from("<I", payload)
        body = payload[4:]
        tag = body[0]
        handler = QUERY_HANDLERS.get(tag)
        if handler is None:
            return MSG_ERROR, encode_error(ERR_BAD_QUERY, f"unknown scheme tag {tag}")
        if tag != table_scheme.DOWNLOAD_ALL_TAG and self.pool is None:
            return MSG_ERROR, encode_error(ERR_NOT_PROVISIONED, "no randomness pool provisioned")
        self.query_served = True
        self.seen_queries.append(body)
        try:
            pool = self.pool if self.pool is not None else CommonRandomnessPool(self.store.q, [])
            symbols = handler(body, self.store, pool)
        except ProtocolFault as exc:
            return MSG_ERROR, encode_error(ERR_BAD_QUERY, str(exc))
        return MSG_ANSWER, encode_answer_symbols(query_id, symbols)


def make_entity_servers(store: MessageStore, n_databases: int, public_info: dict | None = None) -> list[DatabaseServer]:
    """Independent replicas of one entity's store. No shared mutable state."""
    return [DatabaseServer(db, store, public_info) for db in range(n_databases)]


def provision_cr(servers: list[DatabaseServer], pool: CommonRandomnessPool, required_size: int) -> list[str]:
    """Install the same pool on every replica; returns the per-database digests."""
    digests = [srv.provision(pool, required_size) for srv in servers]
    if len(set(digests)) != 1:
        raise ProtocolFault("replicas report differing pool digests")
    return digests


@dataclass
class FaultPlan:
    """Deterministic fault injection for the simulated network.

    ``drop``/``duplicate`` name (db, query_index) pairs whose answers are
    dropped or delivered twice.  Faults surface as decode/transport errors,
    never as silently wrong results.
    """

    drop: set[tuple[int, int]] = dc_field(default_factory=set)
    duplicate: set[tuple[int, int]] = dc_field(default_factory=set)


@dataclass
class Transcript:
    """Client-side record of one run: every query and answer, per database."""

    meta: dict
    records: list[list[tuple[bytes, bytes]]]  # per db: (query payload, answer payload)

    @property
    def downloaded_symbols(self) -> int:
        total = 0
        for db_records in self.records:
            for _, ans in db_records:
                _, symbols = decode_answer_symbols(ans)
                total += len(symbols)
        return total

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(b"PRIVSET-TRANSCRIPT v1\n")
            meta = json.dumps(self.meta, sort_keys=True).encode()
            fh.write(struct.pack("<I", len(meta)) + meta)
            fh.write(struct.pack("<I", len(self.records)))
            for db_records in self.records:
                fh.write(struct.pack("<I", len(db_records)))
                for qry, ans in db_records:
                    fh.write(struct.pack("<I", len(qry)) + qry)
                    fh.write(struct.pack("<I", len(ans)) + ans)

    @classmethod
    def load(cls, path: str) -> "Transcript":
        with open(path, "rb") as fh:
            header = fh.readline()
            if header != b"PRIVSET-TRANSCRIPT v1\n":
                raise TransportError("not a transcript file")

            def read_block() -> bytes:
                raw = fh.read(4)
                if len(raw) != 4:
                    raise TransportError("truncated transcript")
                (n,) = struct.unpack("<I", raw)
                data = fh.read(n)
                if len(data) != n:
                    raise TransportError("truncated transcript")
                return data

            meta = json.loads(read_block())
            raw = fh.read(4)
            (n_dbs,) = struct.unpack("<I", raw)
            records: list[list[tuple[bytes, bytes]]] = []
            for _ in range(n_dbs):
                (n_rec,) = struct.unpack("<I", fh.read(4))
                db_records = []
                for _ in range(n_rec):
                    qry = read_block()
                    ans = read_block()
                    db_records.append((qry, ans))
                records.append(db_records)
            return cls(meta=meta, records=records)

    def dump_text(self) -> str:
        lines = [f"meta: {json.dumps(self.meta, sort_keys=True)}"]
        for db, db_records in enumerate(self.records):
            lines.append(f"database {db}: {len(db_records)} roundtrips")
            for i, (qry, ans) in enumerate(db_records):
                lines.append(f"  q[{i}] {qry.hex()}")
                lines.append(f"  a[{i}] {ans.hex()}")
        return "\n".join(lines)


class Meter:
    """Counts downloaded field symbols, per database and in total."""

    def __init__(self, n_databases: int):
        self.per_db = [0] * n_databases

    def add(self, db: int, n_symbols: int) -> None:
        self.per_db[db] += n_symbols

    @property
    def total(self) -> int:
        return sum(self.per_db)


class Client:
    """Issues queries to one entity's databases over either backend.

    One QUERY frame per database per request batch; answers are matched by
    query id so arbitrary arrival order is tolerated.
    """

    def __init__(self, backend: "SimBackend | TcpBackend"):
        self.backend = backend
        self.meter = Meter(backend.n_databases)
        self.records: list[list[tuple[bytes, bytes]]] = [[] for _ in range(backend.n_databases)]
        self._next_query_id = 0

    def setup_info(self, db: int = 0) -> dict:
        mtype, payload = self.backend.roundtrip(db, MSG_SETUP, b"")
        if mtype != MSG_SETUP:
            raise TransportError("setup exchange failed")
        return json.loads(payload)

    def forward_result(self, payload: bytes, db: int = 0) -> None:
        mtype, _ = self.backend.roundtrip(db, MSG_RESULT_FORWARD, payload)
        if mtype != MSG_RESULT_FORWARD:
            raise TransportError("result forwarding failed")

    def query(self, db: int, body: bytes) -> list[int]:
        qid = self._next_query_id
        self._next_query_id += 1
        payload = struct.pack("<I", qid) + body
        replies = self.backend.query_roundtrip(db, payload)
        if len(replies) == 0:
            raise TransportError(f"answer from database {db} was lost")
        if len(replies) > 1:
            raise ProtocolFault(f"duplicate answers from database {db} for query {qid}")
        mtype, reply = replies[0]
        if mtype == MSG_ERROR:
            code, message = decode_error(reply)
            if code == ERR_NOT_PROVISIONED:
                raise InsufficientRandomness(message)
            raise ProtocolFault(f"database {db} rejected the query: {message}")
        if mtype != MSG_ANSWER:
            raise TransportError(f"unexpected reply type {mtype}")
        got_qid, symbols = decode_answer_symbols(reply)
        if got_qid != qid:
            raise ProtocolFault(f"answer id {got_qid} does not match query id {qid}")
        self.meter.add(db, len(symbols))
        self.records[db].append((payload, reply))
        return symbols

    def query_all(self, bodies: list[bytes]) -> list[list[int]]:
        """One batch: bodies[db] goes to database db; empty bodies are skipped."""
        answers: list[list[int]] = [[] for _ in range(self.backend.n_databases)]

        def one(db: int) -> None:
            if bodies[db]:
                answers[db] = self.query(db, bodies[db])

        if self.backend.concurrent:
            threads = [threading.Thread(target=one, args=(db,)) for db in range(len(bodies))]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        else:
            for db in range(len(bodies)):
                one(db)
        return answers


class SimBackend:
    """In-process deterministic network with optional fault injection."""

    concurrent = False

    def __init__(self, servers: list[DatabaseServer], faults: FaultPlan | None = None):
        self.servers = servers
        self.faults = faults or FaultPlan()
        self._query_count = [0] * len(servers)

    @property
    def n_databases(self) -> int:
        return len(self.servers)

    def roundtrip(self, db: int, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        frame = encode_frame(msg_type, payload)
        mtype, body = decode_frame(frame)
        rtype, rbody = self.servers[db].handle_client_frame(mtype, body)
        reply = encode_frame(rtype, rbody)
        return decode_frame(reply)

    def query_roundtrip(self, db: int, payload: bytes) -> list[tuple[int, bytes]]:
        idx = self._query_count[db]
        self._query_count[db] += 1
        reply = self.roundtrip(db, MSG_QUERY, payload)
        if (db, idx) in self.faults.drop:
            return []
        if (db, idx) in self.faults.duplicate:
            return [reply, reply]
        return [reply]


class TcpBackend:
    """Client side of the TCP backend; one connection per database."""

    concurrent = True

    def __init__(self, addresses: list[tuple[str, int]], timeout: float = 10.0):
        self.addresses = addresses
        self.timeout = timeout
        self._socks: list[socket.socket | None] = [None] * len(addresses)
        self._locks = [threading.Lock() for _ in addresses]

    @property
    def n_databases(self) -> int:
        return len(self.addresses)

    def _sock(self, db: int) -> socket.socket:
        if self._socks[db] is None:
            s = socket.create_connection(self.addresses[db], timeout=self.timeout)
            self._socks[db] = s
        return self._socks[db]

    def roundtrip(self, db: int, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        with self._locks[db]:
            s = self._sock(db)
            s.sendall(encode_frame(msg_type, payload))
            return _read_frame(s)

    def query_roundtrip(self, db: int, payload: bytes) -> list[tuple[int, bytes]]:
        return [self.roundtrip(db, MSG_QUERY, payload)]

    def close(self) -> None:
        for s in self._socks:
            if s is not None:
                s.close()
        self._socks = [None] * len(self.addresses)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise TransportError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def _read_frame(sock: socket.socket) -> tuple[int, bytes]:
    header = _read_exact(sock, _FRAME_HDR.size)
    magic, version, msg_type, length = _FRAME_HDR.unpack(header)
    if magic != MAGIC:
        raise TransportError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TransportError(f"unsupported version {version}")
    payload = _read_exact(sock, length) if length else b""
    return msg_type, payload


class TcpServerPool:
    """Runs each database server on its own localhost port, one thread each.

    Requests on a connection are handled strictly sequentially; databases
    serve concurrently with respect to each other.
    """

    def __init__(self, servers: list[DatabaseServer], host: str = "127.0.0.1", base_port: int = 0):
        self.servers = servers
        self.host = host
        self.base_port = base_port
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self.addresses: list[tuple[str, int]] = []

    def start(self) -> None:
        for i, srv in enumerate(self.servers):
            port = self.base_port + i if self.base_port else 0
            lsock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            lsock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            lsock.bind((self.host, port))
            lsock.listen(4)
            lsock.settimeout(0.2)
            self._listeners.append(lsock)
            self.addresses.append(lsock.getsockname())
            t = threading.Thread(target=self._serve, args=(srv, lsock), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve(self, srv: DatabaseServer, lsock: socket.socket) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = lsock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with conn:
                conn.settimeout(10.0)
                while not self._stop.is_set():
                    try:
                        msg_type, payload = _read_frame(conn)
                    except (TransportError, socket.timeout, OSError):
                        break
                    rtype, rbody = srv.handle_client_frame(msg_type, payload)
                    try:
                        conn.sendall(encode_frame(rtype, rbody))
                    except OSError:
                        break

    def stop(self) -> None:
        self._stop.set()
        for lsock in self._listeners:
            try:
                lsock.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2.0)

    def __enter__(self) -> "TcpServerPool":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def replay_answers(transcript: Transcript, store: MessageStore, pool: CommonRandomnessPool) -> bool:
    """Re-run every recorded query against the given store/pool; True iff all
    answer bytes reproduce exactly."""
    for db_records in transcript.records:
        for qry, ans in db_records:
            (qid,) = struct.unpack_from("<I", qry)
            body = qry[4:]
            handler = QUERY_HANDLERS.get(body[0])
            if handler is None:
                return False
            symbols = handler(body, store, pool)
            if encode_answer_symbols(qid, symbols) != ans:
                return False
    return True


def now_stamp() -> float:
    return time.time()
