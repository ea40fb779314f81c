"""Simulation worlds: a canonical ledger plus everything provers and the verifier derive from it.

``desk_world`` runs the real sparse-Merkle state machine with blocks and a
header chain. ``counter_world`` uses the counter machine, whose entries are
computed on demand and whose leaf digests are built in bulk with numpy, so a
ten-million-entry ledger fits comfortably in memory.
"""

from __future__ import annotations

import random
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .codec import DIGEST_SIZE, Tag, encode_entry, new_tagged_hasher
from .consensus import (
    BlockChainProver,
    ChainProver,
    ConsensusOracle,
    CounterChainOracle,
    CounterChainProver,
    HeaderChainOracle,
)
from .execution import CounterModel, ExecutionModel
from .ledger import LedgerConfig, StateHistory, augment, build_blocks, generate_ledger
from .merkle import MountainRange, leaf_digest
from .objects import AugmentedEntry, OpaqueTx, Transfer, UtxoSpend
from .prover import ProverData

D = DIGEST_SIZE


class PatchedEntries(Sequence[AugmentedEntry]):
    """A view of ``base`` truncated to ``length`` with some entries replaced."""

    def __init__(self, base: Sequence[AugmentedEntry], patches: dict[int, AugmentedEntry], length: int):
        self.base = base
        self.patches = dict(patches)
        self.length = length

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(self.length))]
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        hit = self.patches.get(i)
        return hit if hit is not None else self.base[i]


class CounterEntries(Sequence[AugmentedEntry]):
    def __init__(self, model: CounterModel, length: int):
        self.model = model
        self.length = length

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(self.length))]
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        tx = CounterModel.tx_at(i) if i else None
        return AugmentedEntry(tx, self.model.commitment(i))


def counter_leaf_digests(model: CounterModel, count: int, chunk: int = 1 << 20) -> bytes:
    """Leaf digests of the first ``count`` counter entries, bit-identical to ``leaf_digest``.

    Entry p >= 1 encodes as
    ``u64(17) | 0x03 u64(8) u64(p) | u64(D) | prefix u64(p)``
    and the hashed leaf payload is that encoding with its own length prefix.
    """
    parts = [leaf_digest(encode_entry(CounterEntries(model, 1)[0]))]
    entry_len = 8 + 17 + 8 + D
    width = 8 + entry_len
    base = new_tagged_hasher(Tag.LEAF)
    template = np.zeros(width, dtype=np.uint8)
    head = (
        entry_len.to_bytes(8, "big")
        + (17).to_bytes(8, "big")
        + b"\x03"
        + (8).to_bytes(8, "big")
    )
    template[: len(head)] = np.frombuffer(head, dtype=np.uint8)
    mid = D.to_bytes(8, "big") + model.prefix
    template[len(head) + 8 : len(head) + 8 + len(mid)] = np.frombuffer(mid, dtype=np.uint8)
    pos_a = len(head)
    pos_b = width - 8
    for lo in range(1, count, chunk):
        hi = min(count, lo + chunk)
        n = hi - lo
        rows = np.tile(template, (n, 1))
        idx = np.arange(lo, hi, dtype=">u8").view(np.uint8).reshape(n, 8)
        rows[:, pos_a : pos_a + 8] = idx
        rows[:, pos_b:] = idx
        view = memoryview(rows.tobytes())
        digests = []
        for r in range(n):
            h = base.copy()
            h.update(view[r * width : (r + 1) * width])
            digests.append(h.digest())
        parts.append(b"".join(digests))
    return b"".join(parts)


@lru_cache(maxsize=4)
def _counter_mmr(seed: bytes, count: int, m: int) -> MountainRange:
    return MountainRange.from_leaf_digests(counter_leaf_digests(CounterModel(seed), count), m)


def _mmr_from_entries(entries: Sequence[AugmentedEntry], m: int) -> MountainRange:
    return MountainRange.from_leaf_digests(b"".join(leaf_digest(encode_entry(e)) for e in entries), m)


class World:
    """Canonical augmented ledger of ``len(entries)`` entries and its oracles."""

    def __init__(
        self,
        model: ExecutionModel,
        st0,
        entries: Sequence[AugmentedEntry],
        consensus: ConsensusOracle,
        chain: ChainProver,
        m: int,
        seed: int = 0,
    ):
        self.model = model
        self.st0 = st0
        self.entries = entries
        self.consensus = consensus
        self.chain = chain
        self.m = m
        self.seed = seed
        self._honest: dict[int, ProverData] = {}
        self._history: Optional[StateHistory] = None
        self._fake_serial = 0

    @property
    def length(self) -> int:
        return len(self.entries)

    @property
    def genesis_commit(self) -> bytes:
        return self.entries[0].st

    @property
    def is_counter(self) -> bool:
        return isinstance(self.model, CounterModel)

    # -- witnesses ------------------------------------------------------------

    def _witness_fn(self, txs: Optional[Sequence] = None):
        if self.is_counter:
            return lambda j, tx: b""
        if txs is None:
            if self._history is None:
                self._history = StateHistory(self.model, self.st0, [e.tx for e in self.entries[1:]])
            history = self._history
        else:
            history = StateHistory(self.model, self.st0, txs)
        return lambda j, tx: self.model.witness(history.state_at(j - 1), tx)

    # -- prover data ----------------------------------------------------------

    def _mmr_for_view(self, view: int) -> MountainRange:
        if self.is_counter:
            return _counter_mmr(self.model.seed, view, self.m)
        return _mmr_from_entries(self.entries[:view], self.m)

    def honest(self, view: Optional[int] = None) -> ProverData:
        """Data of an honest prover seeing the first ``view`` augmented entries."""
        view = self.length if view is None else view
        if not 1 <= view <= self.length:
            raise ValueError(f"view {view} outside 1..{self.length}")
        data = self._honest.get(view)
        if data is None:
            entries = PatchedEntries(self.entries, {}, view)
            data = ProverData(entries, self._mmr_for_view(view), self.chain, self._witness_fn())
            self._honest[view] = data
        return data

    def patched(self, patches: dict[int, AugmentedEntry], view: Optional[int] = None) -> ProverData:
        """Honest view with some entries replaced; trees are overlays on the honest ones."""
        base = self.honest(view)
        mmr = base.mmr
        for i, entry in sorted(patches.items()):
            mmr = mmr.with_leaf_digest(i, leaf_digest(encode_entry(entry)))
        entries = PatchedEntries(self.entries, patches, base.length)
        if self.is_counter or all(p.tx == self.entries[i].tx for i, p in patches.items()):
            witness = base.witness_for
        else:
            witness = self._witness_fn([entries[i].tx for i in range(1, len(entries))])
        return ProverData(entries, mmr, self.chain, witness)

    def custom(self, entries: Sequence[AugmentedEntry]) -> ProverData:
        entries = list(entries)
        return ProverData(
            entries,
            _mmr_from_entries(entries, self.m),
            self.chain,
            self._witness_fn([e.tx for e in entries[1:]]),
        )

    # -- corruption helpers ---------------------------------------------------

    def fake_tx(self, position: int):
        """A transaction that appears nowhere in the canonical ledger."""
        self._fake_serial += 1
        tag = (1 << 40) + position * 1024 + self._fake_serial
        if self.is_counter:
            return OpaqueTx(tag.to_bytes(8, "big") + b"forged")
        if isinstance(self.entries[min(position, self.length - 1)].tx, UtxoSpend):
            return UtxoSpend((tag,), ((tag + 1, 1),))
        return Transfer(0, 1, 1, tag)

    def corrupt(self, index: int, field: str, rng: random.Random) -> AugmentedEntry:
        honest = self.entries[index]
        if field == "tx":
            return AugmentedEntry(self.fake_tx(index), honest.st)
        if field == "state":
            st = rng.randbytes(D)
            while st == honest.st:
                st = rng.randbytes(D)
            return AugmentedEntry(honest.tx, st)
        raise ValueError(f"unknown field {field!r}")


def ledger_world(
    ledger, model: ExecutionModel, st0, m: int, block_size: int = 4, block_arity: int = 2, seed: int = 0
) -> World:
    """World around an explicit dirty ledger, packed into blocks of ``block_size``."""
    entries = augment(ledger, st0, model)
    chain, blocks = build_blocks(ledger, block_size, block_arity)
    return World(model, st0, entries, HeaderChainOracle(chain, block_arity), BlockChainProver(blocks), m, seed)


def desk_world(cfg: LedgerConfig, m: int, block_size: int = 4, block_arity: int = 2) -> World:
    if cfg.model == "counter":
        return counter_world(cfg.length, m, cfg.seed)
    gen = generate_ledger(cfg)
    return ledger_world(gen.ledger, gen.model, gen.st0, m, block_size, block_arity, cfg.seed)


def counter_world(n_txs: int, m: int, seed: int = 0) -> World:
    """Counter-model world with ``n_txs`` transactions (``n_txs + 1`` entries)."""
    model = CounterModel(seed.to_bytes(8, "big"))
    return World(
        model,
        model.genesis(),
        CounterEntries(model, n_txs + 1),
        CounterChainOracle(n_txs),
        CounterChainProver(n_txs),
        m,
        seed,
    )
