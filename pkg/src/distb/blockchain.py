"""Transaction pipeline: canonical hashing, contract checks, waiting room,
consensus sealing, the append-only hash chain, gas accounting, and storage.

Canonical byte layout (everything hashed goes through this, never JSON):

    u64       unsigned 64-bit big-endian integer
    bytes     u64 length prefix, then the raw bytes
    str       its UTF-8 encoding as `bytes`

    transaction body = str(sensor_id) + str(destination) + u64(timestamp)
                       + bytes(payload) + checksum(32 raw bytes)
    tx_id            = SHA-256(transaction body)
    checksum         = SHA-256(payload)

    block header     = u64(index) + u64(timestamp) + prev_hash(32 raw)
                       + u64(tx count) + each tx_id (32 raw, in order)
                       + str(sealer kind)
                       + [u64(difficulty) if pow | str(validator) if pos]
                       + u64(nonce)
    block hash       = SHA-256(block header)

A pow seal requires the block hash to carry at least `difficulty` leading
zero bits. The genesis block has index 0 and an all-zero prev_hash.

JSON forms (display transaction, newline-delimited ledger export) are for
humans and files only; they are never hashed.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateTransactionError,
    EmptyBlockError,
    ForkRejectedError,
    NotCommittedError,
    SealInvalidError,
    StorageIntegrityError,
)

ZERO_HASH = bytes(32)

# Affine fit over the embedded gas reference table (see calibration.fit_gas,
# which recomputes these; a test keeps them in sync).
GAS_BASE = 14071.4285714286
GAS_PER_TX = 3337.3015873015856


def _u64(x: int) -> bytes:
    return int(x).to_bytes(8, "big")


def _ser_bytes(b: bytes) -> bytes:
    return _u64(len(b)) + b


def _ser_str(s: str) -> bytes:
    return _ser_bytes(s.encode("utf-8"))


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# ---------------------------------------------------------------------------
# Transactions


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    sensor_id: str
    destination: str
    timestamp: int
    payload: bytes
    checksum: bytes


def tx_body_bytes(sensor_id: str, destination: str, timestamp: int, payload: bytes, checksum: bytes) -> bytes:
    return _ser_str(sensor_id) + _ser_str(destination) + _u64(timestamp) + _ser_bytes(payload) + checksum


def make_transaction(sensor_id: str, destination: str, payload: bytes, now: int) -> Transaction:
    """Build a transaction with checksum and tx_id over the canonical bytes."""
    if not sensor_id or not destination:
        raise ValueError("sensor_id and destination must be non-empty")
    if now < 0:
        raise ValueError("timestamp must be non-negative")
    checksum = digest(payload)
    tx_id = digest(tx_body_bytes(sensor_id, destination, now, payload, checksum))
    return Transaction(
        tx_id=tx_id,
        sensor_id=sensor_id,
        destination=destination,
        timestamp=now,
        payload=payload,
        checksum=checksum,
    )


@dataclass(frozen=True)
class Verdict:
    """Exhaustive three-way validation outcome."""

    status: str  # valid | pending | invalid
    reason: str | None = None

    @classmethod
    def valid(cls) -> "Verdict":
        return cls("valid")

    @classmethod
    def pending(cls, reason: str) -> "Verdict":
        return cls("pending", reason)

    @classmethod
    def invalid(cls, reason: str) -> "Verdict":
        return cls("invalid", reason)

    @property
    def is_valid(self) -> bool:
        return self.status == "valid"

    @property
    def is_pending(self) -> bool:
        return self.status == "pending"

    @property
    def is_invalid(self) -> bool:
        return self.status == "invalid"


@dataclass
class ContractState:
    """Registry of known sensors plus extra validation predicates.

    Each rule is a callable taking the transaction and returning None when
    satisfied or a reason string when violated.
    """

    known_sensors: set[str] = field(default_factory=set)
    rules: tuple = ()

    def register(self, sensor_id: str) -> None:
        self.known_sensors.add(sensor_id)


def verify_transaction(tx: Transaction, contract: ContractState) -> Verdict:
    """Invalid on tampered or malformed content, Pending on unknown sender, else Valid."""
    if not tx.sensor_id or not tx.destination:
        return Verdict.invalid("empty sensor_id or destination")
    if tx.timestamp < 0:
        return Verdict.invalid("negative timestamp")
    if tx.checksum != digest(tx.payload):
        return Verdict.invalid("payload checksum mismatch")
    expected_id = digest(tx_body_bytes(tx.sensor_id, tx.destination, tx.timestamp, tx.payload, tx.checksum))
    if tx.tx_id != expected_id:
        return Verdict.invalid("tx_id does not match canonical body")
    for rule in contract.rules:
        reason = rule(tx)
        if reason is not None:
            return Verdict.invalid(reason)
    if tx.sensor_id not in contract.known_sensors:
        return Verdict.pending(f"unknown sensor {tx.sensor_id}")
    return Verdict.valid()


# ---------------------------------------------------------------------------
# Blocks and mining


@dataclass(frozen=True)
class Sealer:
    kind: str  # pow | pos
    difficulty: int = 0
    validator: str = ""


@dataclass(frozen=True)
class Block:
    index: int
    timestamp: int
    prev_hash: bytes
    tx_list: tuple[Transaction, ...]
    nonce: int
    sealer: Sealer
    hash: bytes


def _sealer_bytes(sealer: Sealer) -> bytes:
    if sealer.kind == "pow":
        return _ser_str("pow") + _u64(sealer.difficulty)
    if sealer.kind == "pos":
        return _ser_str("pos") + _ser_str(sealer.validator)
    raise ValueError(f"unknown sealer kind {sealer.kind!r}")


def block_header_bytes(index: int, timestamp: int, prev_hash: bytes, tx_ids, sealer: Sealer, nonce: int) -> bytes:
    head = _u64(index) + _u64(timestamp) + prev_hash + _u64(len(tx_ids)) + b"".join(tx_ids)
    return head + _sealer_bytes(sealer) + _u64(nonce)


def leading_zero_bits(data: bytes) -> int:
    return len(data) * 8 - int.from_bytes(data, "big").bit_length()


def mine_block(txs, prev_hash: bytes, difficulty: int, now: int, index: int) -> Block:
    """Proof-of-work sealing: count the nonce up from 0 until the digest clears
    the difficulty. Deterministic for fixed inputs."""
    if difficulty < 0:
        raise ValueError("difficulty must be >= 0 bits")
    if index > 0 and not txs:
        raise EmptyBlockError("non-genesis block needs at least one transaction")
    tx_list = tuple(txs)
    sealer = Sealer(kind="pow", difficulty=difficulty)
    prefix = (
        _u64(index)
        + _u64(now)
        + prev_hash
        + _u64(len(tx_list))
        + b"".join(t.tx_id for t in tx_list)
        + _sealer_bytes(sealer)
    )
    nonce = 0
    while True:
        h = digest(prefix + _u64(nonce))
        if leading_zero_bits(h) >= difficulty:
            return Block(
                index=index,
                timestamp=now,
                prev_hash=prev_hash,
                tx_list=tx_list,
                nonce=nonce,
                sealer=sealer,
                hash=h,
            )
        nonce += 1


def seal_block_pos(txs, prev_hash: bytes, validator: str, now: int, index: int) -> Block:
    """Stake-based sealing: no difficulty target, the chosen validator signs the tag."""
    if index > 0 and not txs:
        raise EmptyBlockError("non-genesis block needs at least one transaction")
    if not validator:
        raise ValueError("validator id must be non-empty")
    tx_list = tuple(txs)
    sealer = Sealer(kind="pos", validator=validator)
    h = digest(block_header_bytes(index, now, prev_hash, [t.tx_id for t in tx_list], sealer, 0))
    return Block(
        index=index,
        timestamp=now,
        prev_hash=prev_hash,
        tx_list=tx_list,
        nonce=0,
        sealer=sealer,
        hash=h,
    )


def select_validator(stakes: dict[str, float], seed: int) -> str:
    """Seeded stake-weighted choice; zero-stake validators are never picked."""
    entries = [(v, w) for v, w in sorted(stakes.items()) if w > 0]
    if any(w < 0 for w in stakes.values()):
        raise ValueError("stakes must be non-negative")
    if not entries:
        raise ValueError("at least one validator needs positive stake")
    total = sum(w for _, w in entries)
    r = random.Random(seed).random() * total
    acc = 0.0
    for v, w in entries:
        acc += w
        if r < acc:
            return v
    return entries[-1][0]


# ---------------------------------------------------------------------------
# Ledger


@dataclass
class Ledger:
    """Append-only chain plus the valid-transaction queue and the waiting room.

    The id sets are maintained incrementally so admission checks stay O(1)
    over long runs.
    """

    blocks: list[Block] = field(default_factory=list)
    queued: list[Transaction] = field(default_factory=list)
    pending: list[tuple[Transaction, int]] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)
    t_pending_ms: int = 30_000
    committed_ids: set[bytes] = field(default_factory=set)
    queued_ids: set[bytes] = field(default_factory=set)
    pending_ids: set[bytes] = field(default_factory=set)
    block_hashes: set[bytes] = field(default_factory=set)

    @property
    def tip_hash(self) -> bytes:
        return self.blocks[-1].hash if self.blocks else ZERO_HASH

    def known_ids(self) -> set[bytes]:
        return self.committed_ids | self.queued_ids | self.pending_ids


def admit_or_park(ledger: Ledger, tx: Transaction, verdict: Verdict, now: int) -> Ledger:
    """Route by verdict: Valid -> queue, Pending -> waiting room, Invalid -> audit drop."""
    if (
        tx.tx_id in ledger.committed_ids
        or tx.tx_id in ledger.queued_ids
        or tx.tx_id in ledger.pending_ids
    ):
        raise DuplicateTransactionError(f"tx {tx.tx_id.hex()} already known")
    if verdict.is_valid:
        ledger.queued.append(tx)
        ledger.queued_ids.add(tx.tx_id)
    elif verdict.is_pending:
        ledger.pending.append((tx, now))
        ledger.pending_ids.add(tx.tx_id)
    else:
        ledger.audit.append(
            {"event": "rejected", "tx_id": tx.tx_id.hex(), "reason": verdict.reason, "at": now}
        )
    return ledger


def expire_pending(ledger: Ledger, contract: ContractState, now: int) -> tuple[Ledger, list[bytes]]:
    """Sweep the waiting room: promote entries whose sensor has since been
    registered, then discard anything parked for t_pending_ms or longer."""
    keep: list[tuple[Transaction, int]] = []
    discarded: list[bytes] = []
    for tx, entered_at in ledger.pending:
        if tx.sensor_id in contract.known_sensors:
            ledger.queued.append(tx)
            ledger.queued_ids.add(tx.tx_id)
            ledger.pending_ids.discard(tx.tx_id)
            ledger.audit.append({"event": "promoted", "tx_id": tx.tx_id.hex(), "at": now})
        elif now - entered_at >= ledger.t_pending_ms:
            discarded.append(tx.tx_id)
            ledger.pending_ids.discard(tx.tx_id)
            ledger.audit.append({"event": "expired", "tx_id": tx.tx_id.hex(), "at": now})
        else:
            keep.append((tx, entered_at))
    ledger.pending = keep
    return ledger, discarded


def _check_seal(block: Block) -> str | None:
    try:
        header = block_header_bytes(
            block.index,
            block.timestamp,
            block.prev_hash,
            [t.tx_id for t in block.tx_list],
            block.sealer,
            block.nonce,
        )
    except ValueError as exc:
        return str(exc)
    if digest(header) != block.hash:
        return "hash does not match header"
    if block.sealer.kind == "pow" and leading_zero_bits(block.hash) < block.sealer.difficulty:
        return "hash misses difficulty target"
    if block.sealer.kind == "pos" and not block.sealer.validator:
        return "pos seal without validator"
    return None


def append_block(ledger: Ledger, block: Block) -> Ledger:
    """Extend the chain; rejects forks and bad seals, dedups committed txs."""
    if block.prev_hash != ledger.tip_hash or block.index != len(ledger.blocks):
        raise ForkRejectedError(
            f"block {block.index} does not extend tip at height {len(ledger.blocks)}"
        )
    reason = _check_seal(block)
    if reason is not None:
        raise SealInvalidError(reason)
    for tx in block.tx_list:
        if tx.tx_id in ledger.committed_ids:
            raise DuplicateTransactionError(f"tx {tx.tx_id.hex()} already committed")
    ledger.blocks.append(block)
    ledger.block_hashes.add(block.hash)
    block_ids = {t.tx_id for t in block.tx_list}
    ledger.queued = [t for t in ledger.queued if t.tx_id not in block_ids]
    ledger.queued_ids -= block_ids
    ledger.committed_ids.update(block_ids)
    return ledger


def validate_chain(ledger: Ledger) -> tuple[bool, int | None]:
    """Recompute every digest and linkage. Returns (ok, first bad index or None)."""
    if not ledger.blocks:
        return False, 0
    seen: set[bytes] = set()
    prev = ZERO_HASH
    for i, block in enumerate(ledger.blocks):
        if block.index != i or block.prev_hash != prev:
            return False, i
        for tx in block.tx_list:
            if tx.checksum != digest(tx.payload):
                return False, i
            body = tx_body_bytes(tx.sensor_id, tx.destination, tx.timestamp, tx.payload, tx.checksum)
            if tx.tx_id != digest(body):
                return False, i
            if tx.tx_id in seen:
                return False, i
            seen.add(tx.tx_id)
        if _check_seal(block) is not None:
            return False, i
        prev = block.hash
    return True, None


def gas_for(batch_size: int, base: float = GAS_BASE, per_tx: float = GAS_PER_TX) -> int:
    """Gas for committing a batch: 0 for the empty batch, else the affine model."""
    if batch_size < 0:
        raise ValueError("batch size must be >= 0")
    if batch_size == 0:
        return 0
    return round(base + per_tx * batch_size)


# ---------------------------------------------------------------------------
# JSON forms and storage


def tx_display_dict(tx: Transaction) -> dict:
    return {
        "tx_id": tx.tx_id.hex(),
        "sensor_id": tx.sensor_id,
        "destination": tx.destination,
        "timestamp": tx.timestamp,
        "payload_hex": tx.payload.hex(),
        "checksum": tx.checksum.hex(),
    }


def tx_from_display(doc: dict) -> Transaction:
    return Transaction(
        tx_id=bytes.fromhex(doc["tx_id"]),
        sensor_id=doc["sensor_id"],
        destination=doc["destination"],
        timestamp=int(doc["timestamp"]),
        payload=bytes.fromhex(doc["payload_hex"]),
        checksum=bytes.fromhex(doc["checksum"]),
    )


def block_to_dict(block: Block) -> dict:
    return {
        "index": block.index,
        "timestamp": block.timestamp,
        "prev_hash": block.prev_hash.hex(),
        "nonce": block.nonce,
        "sealer": {
            "kind": block.sealer.kind,
            "difficulty": block.sealer.difficulty,
            "validator": block.sealer.validator,
        },
        "hash": block.hash.hex(),
        "txs": [tx_display_dict(t) for t in block.tx_list],
    }


def block_from_dict(doc: dict) -> Block:
    return Block(
        index=int(doc["index"]),
        timestamp=int(doc["timestamp"]),
        prev_hash=bytes.fromhex(doc["prev_hash"]),
        tx_list=tuple(tx_from_display(t) for t in doc["txs"]),
        nonce=int(doc["nonce"]),
        sealer=Sealer(
            kind=doc["sealer"]["kind"],
            difficulty=int(doc["sealer"]["difficulty"]),
            validator=doc["sealer"]["validator"],
        ),
        hash=bytes.fromhex(doc["hash"]),
    )


def export_ledger(ledger: Ledger) -> str:
    """Newline-delimited JSON, one block per line."""
    return "".join(json.dumps(block_to_dict(b), sort_keys=True) + "\n" for b in ledger.blocks)


def load_ledger(text: str) -> Ledger:
    blocks = []
    for line in text.splitlines():
        if line.strip():
            blocks.append(block_from_dict(json.loads(line)))
    ledger = Ledger(blocks=blocks)
    for b in blocks:
        ledger.committed_ids.update(t.tx_id for t in b.tx_list)
        ledger.block_hashes.add(b.hash)
    return ledger


class BlockStore:
    """Content-addressed block storage stub; record id = block hash (hex).

    In-memory by default; give it a directory to persist one JSON file per
    block. Reads re-derive the block hash and fail loudly on any corruption.
    """

    def __init__(self, root: str | Path | None = None):
        self._mem: dict[str, bytes] = {}
        self._root = Path(root) if root is not None else None
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)

    def _path(self, record_id: str) -> Path:
        return self._root / f"{record_id}.json"

    def put(self, block: Block) -> str:
        record_id = block.hash.hex()
        data = json.dumps(block_to_dict(block), sort_keys=True).encode("utf-8")
        if self._root is None:
            self._mem[record_id] = data
        else:
            path = self._path(record_id)
            if not path.exists():
                path.write_bytes(data)
        return record_id

    def get(self, record_id: str) -> Block:
        if self._root is None:
            if record_id not in self._mem:
                raise KeyError(record_id)
            data = self._mem[record_id]
        else:
            path = self._path(record_id)
            if not path.exists():
                raise KeyError(record_id)
            data = path.read_bytes()
        try:
            block = block_from_dict(json.loads(data.decode("utf-8")))
        except Exception as exc:
            raise StorageIntegrityError(f"record {record_id} unreadable: {exc}") from exc
        for tx in block.tx_list:
            body = tx_body_bytes(tx.sensor_id, tx.destination, tx.timestamp, tx.payload, tx.checksum)
            if tx.checksum != digest(tx.payload) or tx.tx_id != digest(body):
                raise StorageIntegrityError(f"record {record_id} holds a tampered transaction")
        header = block_header_bytes(
            block.index,
            block.timestamp,
            block.prev_hash,
            [t.tx_id for t in block.tx_list],
            block.sealer,
            block.nonce,
        )
        if digest(header) != block.hash or block.hash.hex() != record_id:
            raise StorageIntegrityError(f"record {record_id} failed hash verification")
        return block

    def __contains__(self, record_id: str) -> bool:
        if self._root is None:
            return record_id in self._mem
        return self._path(record_id).exists()


def commit_to_storage(ledger: Ledger, block: Block, store: BlockStore) -> str:
    """Persist an appended block; committing twice is a no-op with the same id."""
    if block.hash not in ledger.block_hashes:
        raise NotCommittedError("block is not part of the ledger")
    return store.put(block)
