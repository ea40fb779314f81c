"""State machine, state commitments and the execution oracle.

State lives in a fixed-depth sparse Merkle tree keyed by 64-bit integers. Two
transaction kinds share one transition function:

* ``Transfer`` (account model): valid iff the sender holds at least ``amount``.
  Balances are stored only while non-zero, so an emptied account is absent.
* ``UtxoSpend``: valid iff every input exists, every output key is fresh,
  keys are distinct, amounts are positive and outputs do not exceed inputs.

An invalid transaction leaves the state untouched. A witness carries the
pre-state value and authentication path of every key the transaction reads or
writes; from it the verifier recomputes the post-state root without the state.

``CounterModel`` is a minimal machine whose state is a single counter and whose
commitment is an injective encoding of it. It needs no witness and is what
makes ten-million-entry ledgers affordable in simulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .codec import (
    DIGEST_SIZE,
    U64_MAX,
    Reader,
    Tag,
    decode_whole,
    encode_digests,
    hash_tagged,
    u64,
)
from .errors import DecodeError, InvalidGenesis
from .objects import OpaqueTx, Transaction, Transfer, UtxoSpend

DEFAULT_DEPTH = 32
# Bound on keys a single utxo spend may touch; larger spends are invalid.
MAX_TOUCHED = 16


def state_leaf_digest(key: int, value: Optional[int]) -> bytes:
    if value is None:
        return hash_tagged(Tag.STATE_LEAF, b"")
    return hash_tagged(Tag.STATE_LEAF, u64(key) + u64(value))


def _inner(left: bytes, right: bytes) -> bytes:
    return hash_tagged(Tag.INNER, encode_digests((left, right)))


@lru_cache(maxsize=None)
def default_digests(depth: int) -> tuple[bytes, ...]:
    """Digest of an all-empty subtree at every level, leaves first."""
    out = [state_leaf_digest(0, None)]
    for _ in range(depth):
        out.append(_inner(out[-1], out[-1]))
    return tuple(out)


@dataclass(frozen=True)
class SmtProof:
    """Inclusion (value set) or non-inclusion (value None) proof for one key."""

    key: int
    value: Optional[int]
    siblings: tuple[bytes, ...]

    def root_for(self, leaf: bytes) -> bytes:
        cur = leaf
        for level, sib in enumerate(self.siblings):
            cur = _inner(sib, cur) if self.key >> level & 1 else _inner(cur, sib)
        return cur

    def verify(self, root: bytes, depth: int) -> bool:
        if len(self.siblings) != depth or not 0 <= self.key < 1 << depth:
            return False
        if any(len(s) != DIGEST_SIZE for s in self.siblings):
            return False
        return self.root_for(state_leaf_digest(self.key, self.value)) == root

    def encode(self) -> bytes:
        flag = b"\x00" if self.value is None else b"\x01"
        return u64(self.key) + flag + u64(self.value or 0) + encode_digests(self.siblings)

    @staticmethod
    def read(reader: Reader) -> "SmtProof":
        key = reader.u64()
        flag = reader.u8()
        value = reader.u64()
        if flag not in (0, 1) or (flag == 0 and value):
            raise DecodeError("bad presence flag")
        return SmtProof(key, value if flag else None, tuple(reader.digests()))


class SparseState:
    """Immutable sparse Merkle key-value store; every update returns a new value."""

    __slots__ = ("depth", "max_touched", "_leaves", "_nodes")

    def __init__(self, depth: int = DEFAULT_DEPTH, max_touched: int = MAX_TOUCHED):
        if not 1 <= depth <= 64:
            raise ValueError("depth must be within 1..64")
        self.depth = depth
        self.max_touched = max_touched
        self._leaves: dict[int, int] = {}
        self._nodes: dict[tuple[int, int], bytes] = {}

    def _node(self, level: int, prefix: int) -> bytes:
        hit = self._nodes.get((level, prefix))
        return hit if hit is not None else default_digests(self.depth)[level]

    @property
    def root(self) -> bytes:
        return self._node(self.depth, 0)

    def get(self, key: int) -> Optional[int]:
        return self._leaves.get(key)

    def items(self) -> list[tuple[int, int]]:
        return sorted(self._leaves.items())

    def __len__(self) -> int:
        return len(self._leaves)

    def __eq__(self, other) -> bool:
        return isinstance(other, SparseState) and self.depth == other.depth and self._leaves == other._leaves

    def __hash__(self) -> int:
        return hash(self.root)

    def with_updates(self, updates: Mapping[int, Optional[int]]) -> "SparseState":
        """Return a state with ``updates`` applied; a value of None deletes the key."""
        new = SparseState.__new__(SparseState)
        new.depth, new.max_touched = self.depth, self.max_touched
        new._leaves = dict(self._leaves)
        new._nodes = dict(self._nodes)
        defaults = default_digests(self.depth)
        for key, value in updates.items():
            if not 0 <= key < 1 << self.depth:
                raise ValueError(f"key {key} outside {self.depth}-bit key space")
            if value is None:
                new._leaves.pop(key, None)
            else:
                new._leaves[key] = value
            digest = state_leaf_digest(key, value)
            for level in range(self.depth + 1):
                prefix = key >> level
                if level:
                    digest = _inner(new._node(level - 1, prefix << 1), new._node(level - 1, prefix << 1 | 1))
                if digest == defaults[level]:
                    new._nodes.pop((level, prefix), None)
                else:
                    new._nodes[(level, prefix)] = digest
        return new

    def prove(self, key: int) -> SmtProof:
        siblings = tuple(self._node(level, (key >> level) ^ 1) for level in range(self.depth))
        return SmtProof(key, self._leaves.get(key), siblings)


def rebuild_root(items: Iterable[tuple[int, int]], depth: int) -> bytes:
    """Root computed from scratch, without any cached nodes."""
    defaults = default_digests(depth)
    layer = {k: state_leaf_digest(k, v) for k, v in items}
    for level in range(depth):
        parents: dict[int, bytes] = {}
        for prefix in {k >> 1 for k in layer}:
            left = layer.get(prefix << 1, defaults[level])
            right = layer.get(prefix << 1 | 1, defaults[level])
            parents[prefix] = _inner(left, right)
        layer = parents
    return layer.get(0, defaults[depth])


def genesis_state(
    allocations: Iterable[tuple[int, int]] = (),
    depth: int = DEFAULT_DEPTH,
    max_touched: int = MAX_TOUCHED,
) -> SparseState:
    updates: dict[int, Optional[int]] = {}
    for key, amount in allocations:
        if key in updates:
            raise InvalidGenesis(f"duplicate allocation for key {key}")
        if not 0 <= key < 1 << depth or not 0 < amount <= U64_MAX:
            raise InvalidGenesis(f"allocation ({key}, {amount}) out of range")
        updates[key] = amount
    return SparseState(depth, max_touched).with_updates(updates)


def load_allocations(path: str | Path) -> list[tuple[int, int]]:
    """Read a genesis file: a JSON list of ``[key_hex, amount]`` pairs or ``{"key", "amount"}`` objects."""
    out = []
    for record in json.loads(Path(path).read_text()):
        if isinstance(record, dict):
            key, amount = record["key"], record["amount"]
        else:
            key, amount = record
        out.append((int(key, 16), int(amount)))
    return out


def touched_keys(tx: Optional[Transaction]) -> tuple[int, ...]:
    """Keys a transaction reads or writes, in first-appearance order."""
    if isinstance(tx, Transfer):
        keys: Sequence[int] = (tx.sender, tx.recipient)
    elif isinstance(tx, UtxoSpend):
        keys = tx.inputs + tuple(k for k, _ in tx.outputs)
    else:
        keys = ()
    return tuple(dict.fromkeys(keys))


def transition(
    values: Mapping[int, Optional[int]], tx: Optional[Transaction], depth: int, max_touched: int
) -> Optional[dict[int, Optional[int]]]:
    """Leaf updates a transaction makes given its touched values; None when invalid."""
    if any(not 0 <= k < 1 << depth for k in touched_keys(tx)):
        return None
    if isinstance(tx, Transfer):
        balance = values.get(tx.sender) or 0
        if tx.amount < 1 or balance < tx.amount:
            return None
        if tx.sender == tx.recipient:
            return {}
        credited = (values.get(tx.recipient) or 0) + tx.amount
        if credited > U64_MAX:
            return None
        return {tx.sender: (balance - tx.amount) or None, tx.recipient: credited}
    if isinstance(tx, UtxoSpend):
        out_keys = [k for k, _ in tx.outputs]
        if not tx.inputs or len(tx.inputs) + len(out_keys) > max_touched:
            return None
        if len(set(tx.inputs)) != len(tx.inputs) or len(set(out_keys)) != len(out_keys):
            return None
        if set(tx.inputs) & set(out_keys):
            return None
        if any(values.get(k) is None for k in tx.inputs):
            return None
        if any(values.get(k) is not None for k in out_keys):
            return None
        if any(a < 1 for _, a in tx.outputs):
            return None
        if sum(a for _, a in tx.outputs) > sum(values[k] for k in tx.inputs):
            return None
        updates: dict[int, Optional[int]] = {k: None for k in tx.inputs}
        updates.update(dict(tx.outputs))
        return updates
    return None


def delta(st: SparseState, tx: Optional[Transaction]) -> SparseState:
    values = {k: st.get(k) for k in touched_keys(tx)}
    updates = transition(values, tx, st.depth, st.max_touched)
    if not updates:
        return st
    return st.with_updates(updates)


def delta_star(st0: SparseState, txs: Iterable[Optional[Transaction]]) -> SparseState:
    st = st0
    for tx in txs:
        st = delta(st, tx)
    return st


def commit(st: SparseState) -> bytes:
    return st.root


@dataclass(frozen=True)
class ExecutionWitness:
    proofs: tuple[SmtProof, ...]

    @property
    def touched(self) -> tuple[tuple[int, Optional[int]], ...]:
        return tuple((p.key, p.value) for p in self.proofs)

    def encode(self) -> bytes:
        return u64(len(self.proofs)) + b"".join(p.encode() for p in self.proofs)

    @staticmethod
    def decode(data: bytes) -> "ExecutionWitness":
        def parse(reader: Reader) -> ExecutionWitness:
            return ExecutionWitness(tuple(SmtProof.read(reader) for _ in range(reader.count(17))))

        return decode_whole(data, parse)


def make_witness(st: SparseState, tx: Optional[Transaction]) -> ExecutionWitness:
    keys = [k for k in touched_keys(tx) if 0 <= k < 1 << st.depth]
    return ExecutionWitness(tuple(st.prove(k) for k in keys))


def succinct_delta(
    pre: bytes,
    tx: Optional[Transaction],
    w: ExecutionWitness,
    depth: int = DEFAULT_DEPTH,
    max_touched: int = MAX_TOUCHED,
) -> Optional[bytes]:
    """Post-state commitment from a witness, or None when the witness is unusable."""
    values: dict[int, Optional[int]] = {}
    for proof in w.proofs:
        if proof.key in values or not proof.verify(pre, depth):
            return None
        values[proof.key] = proof.value
    needed = [k for k in touched_keys(tx) if 0 <= k < 1 << depth]
    if any(k not in values for k in needed):
        return None
    updates = transition(values, tx, depth, max_touched)
    if not updates:
        return pre
    # Path nodes are authoritative; siblings only fill gaps. All proofs share
    # one verified root, so where they overlap they agree.
    known: dict[tuple[int, int], bytes] = {}
    for proof in w.proofs:
        cur = state_leaf_digest(proof.key, proof.value)
        for level, sib in enumerate(proof.siblings):
            known[(level, proof.key >> level)] = cur
            cur = _inner(sib, cur) if proof.key >> level & 1 else _inner(cur, sib)
    for proof in w.proofs:
        for level, sib in enumerate(proof.siblings):
            known.setdefault((level, (proof.key >> level) ^ 1), sib)
    for key, value in updates.items():
        known[(0, key)] = state_leaf_digest(key, value)
        for level in range(1, depth + 1):
            prefix = key >> level
            known[(level, prefix)] = _inner(known[(level - 1, prefix << 1)], known[(level - 1, prefix << 1 | 1)])
    return known[(depth, 0)]


def exec_oracle_query(
    tx: Optional[Transaction],
    pre: bytes,
    post_claim: bytes,
    fetch_witness: Callable[[], Optional[bytes]],
    model: "ExecutionModel",
) -> tuple[bool, str]:
    """Ask a prover for a witness and check the claimed transition.

    ``fetch_witness`` returns the prover's raw reply, or None on timeout.
    Returns (accepted, reason).
    """
    raw = fetch_witness()
    if raw is None:
        return False, "timeout"
    post = model.check(pre, tx, raw)
    if post is None:
        return False, "unusable witness"
    if post != post_claim:
        return False, "commitment mismatch"
    return True, "ok"


class ExecutionModel:
    """What provers and the verifier need from a state machine."""

    name = "abstract"

    def commit(self, state) -> bytes:
        raise NotImplementedError

    def delta(self, state, tx):
        raise NotImplementedError

    def witness(self, state, tx) -> bytes:
        raise NotImplementedError

    def check(self, pre: bytes, tx, raw_witness: bytes) -> Optional[bytes]:
        """Succinct transition from raw witness bytes; None if unusable."""
        raise NotImplementedError


class SmtModel(ExecutionModel):
    name = "smt"

    def __init__(self, depth: int = DEFAULT_DEPTH, max_touched: int = MAX_TOUCHED):
        self.depth = depth
        self.max_touched = max_touched

    def genesis(self, allocations: Iterable[tuple[int, int]] = ()) -> SparseState:
        return genesis_state(allocations, self.depth, self.max_touched)

    def commit(self, state: SparseState) -> bytes:
        return commit(state)

    def delta(self, state: SparseState, tx) -> SparseState:
        return delta(state, tx)

    def witness(self, state: SparseState, tx) -> bytes:
        return make_witness(state, tx).encode()

    def check(self, pre: bytes, tx, raw_witness: bytes) -> Optional[bytes]:
        try:
            w = ExecutionWitness.decode(raw_witness)
        except DecodeError:
            return None
        return succinct_delta(pre, tx, w, self.depth, self.max_touched)


class CounterModel(ExecutionModel):
    """State is the number of applied transactions; transaction p carries index p."""

    name = "counter"

    def __init__(self, seed: bytes = b""):
        self.seed = seed
        self.prefix = hash_tagged(Tag.STATE_LEAF, b"counter" + seed)[: DIGEST_SIZE - 8]

    def genesis(self) -> int:
        return 0

    def commitment(self, counter: int) -> bytes:
        return self.prefix + u64(counter)

    @staticmethod
    def tx_at(position: int) -> OpaqueTx:
        return OpaqueTx(u64(position))

    def commit(self, state: int) -> bytes:
        return self.commitment(state)

    def delta(self, state: int, tx) -> int:
        if isinstance(tx, OpaqueTx) and tx.payload == u64(state + 1):
            return state + 1
        return state

    def witness(self, state: int, tx) -> bytes:
        return b""

    def check(self, pre: bytes, tx, raw_witness: bytes) -> Optional[bytes]:
        if raw_witness or len(pre) != DIGEST_SIZE or pre[:-8] != self.prefix:
            return None
        return self.commitment(self.delta(int.from_bytes(pre[-8:], "big"), tx))
