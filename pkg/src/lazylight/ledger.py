"""Dirty ledgers, blocks and header chains, augmented ledgers, and the ledger generator."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .codec import Tag, encode_tx, hash_tagged, tx_digest
from .errors import InvalidBlockSize, InvalidParams
from .execution import DEFAULT_DEPTH, CounterModel, ExecutionModel, SmtModel
from .merkle import MerkleTree
from .objects import AugmentedEntry, Header, Transaction, Transfer, UtxoSpend

# Fills block trees up to a power of two; a tagged empty payload, so it can
# never equal the digest of a real transaction.
PADDING_DIGEST = hash_tagged(Tag.LEAF, b"")


class DirtyLedger(Sequence[Transaction]):
    """Totally ordered transactions, valid and invalid; no two are byte-identical."""

    def __init__(self, txs: Sequence[Transaction] = ()):
        self.txs = tuple(txs)
        if len({encode_tx(t) for t in self.txs}) != len(self.txs):
            raise ValueError("dirty ledger transactions must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.txs)

    def __getitem__(self, i):
        return self.txs[i]

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.txs)

    def __eq__(self, other) -> bool:
        return isinstance(other, DirtyLedger) and self.txs == other.txs

    def __repr__(self) -> str:
        return f"DirtyLedger({len(self.txs)} txs)"


def _smt_default(model: Optional[ExecutionModel]) -> ExecutionModel:
    return model if model is not None else SmtModel()


def augment(ledger: Sequence[Transaction], st0, model: Optional[ExecutionModel] = None) -> list[AugmentedEntry]:
    model = _smt_default(model)
    entries = [AugmentedEntry(None, model.commit(st0))]
    st = st0
    for tx in ledger:
        st = model.delta(st, tx)
        entries.append(AugmentedEntry(tx, model.commit(st)))
    return entries


def is_well_formed(
    entries: Sequence[AugmentedEntry],
    ledger: Sequence[Transaction],
    st0,
    model: Optional[ExecutionModel] = None,
) -> bool:
    model = _smt_default(model)
    if not entries or entries[0] != AugmentedEntry(None, model.commit(st0)):
        return False
    if len(entries) - 1 > len(ledger):
        return False
    # Entry i must carry ledger[i-1]: consecutive pairs then form a subarray.
    st = st0
    for i, entry in enumerate(entries[1:], start=1):
        if entry.tx is None or entry.tx != ledger[i - 1]:
            return False
        st = model.delta(st, entry.tx)
        if entry.st != model.commit(st):
            return False
    return True


class StateHistory:
    """Pre-states of a ledger, replayed on demand from periodic checkpoints."""

    def __init__(self, model: ExecutionModel, st0, txs: Sequence[Optional[Transaction]], interval: int = 32):
        self.model = model
        self.txs = txs
        self.interval = interval
        self._checkpoints = [st0]
        st = st0
        for i, tx in enumerate(txs, start=1):
            st = model.delta(st, tx)
            if i % interval == 0:
                self._checkpoints.append(st)

    def state_at(self, i: int):
        """State after the first ``i`` transactions."""
        if not 0 <= i <= len(self.txs):
            raise IndexError(i)
        base = i // self.interval
        st = self._checkpoints[base]
        for tx in self.txs[base * self.interval : i]:
            st = self.model.delta(st, tx)
        return st


@dataclass(frozen=True)
class Block:
    txs: tuple[Transaction, ...]
    tree: MerkleTree

    @property
    def tx_root(self) -> bytes:
        return self.tree.root


@dataclass(frozen=True)
class HeaderChain:
    headers: tuple[Header, ...]

    def __len__(self) -> int:
        return len(self.headers)


def block_tree(txs: Sequence[Transaction], arity: int = 2) -> MerkleTree:
    width = 1
    while width < len(txs):
        width *= 2
    leaves = [tx_digest(t) for t in txs] + [PADDING_DIGEST] * (width - len(txs))
    return MerkleTree.from_leaf_digests(b"".join(leaves), arity)


def build_blocks(ledger: Sequence[Transaction], block_size: int, arity: int = 2) -> tuple[HeaderChain, list[Block]]:
    if block_size < 1:
        raise InvalidBlockSize("block size must be at least 1")
    blocks, headers = [], []
    for height, start in enumerate(range(0, len(ledger), block_size)):
        txs = tuple(ledger[start : start + block_size])
        block = Block(txs, block_tree(txs, arity))
        blocks.append(block)
        headers.append(Header(height, block.tx_root, len(txs)))
    return HeaderChain(tuple(headers)), blocks


@dataclass(frozen=True)
class LedgerConfig:
    length: int
    invalid_fraction: float = 0.0
    conflict_fraction: float = 0.0
    seed: int = 0
    model: str = "account"
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.length < 0:
            raise InvalidParams("ledger length must be non-negative")
        if not 0 <= self.invalid_fraction <= 1 or not 0 <= self.conflict_fraction <= 1:
            raise InvalidParams("fractions must lie in [0, 1]")
        if self.model not in ("account", "utxo", "counter"):
            raise InvalidParams(f"unknown model {self.model!r}")


@dataclass(frozen=True)
class GeneratedLedger:
    ledger: DirtyLedger
    model: ExecutionModel
    st0: object
    allocations: tuple[tuple[int, int], ...] = ()


def generate_ledger(cfg: LedgerConfig) -> GeneratedLedger:
    """Deterministic synthetic ledger mixing valid, invalid and conflicting transactions."""
    if cfg.model == "counter":
        model = CounterModel(cfg.seed.to_bytes(8, "big"))
        txs = [CounterModel.tx_at(p) for p in range(1, cfg.length + 1)]
        return GeneratedLedger(DirtyLedger(txs), model, model.genesis())
    rng = random.Random(cfg.seed)
    gen = _account_txs if cfg.model == "account" else _utxo_txs
    allocations, txs = gen(cfg, rng)
    model = SmtModel(depth=cfg.depth)
    return GeneratedLedger(DirtyLedger(txs), model, model.genesis(allocations), tuple(allocations))


def _account_txs(cfg: LedgerConfig, rng: random.Random):
    n_accounts = max(4, cfg.length // 4)
    balances = {k: rng.randint(50, 150) for k in range(n_accounts)}
    allocations = sorted(balances.items())
    txs: list[Transaction] = []
    nonce = 0

    def emit(sender: int, recipient: int, amount: int) -> None:
        nonlocal nonce
        txs.append(Transfer(sender, recipient, amount, nonce))
        nonce += 1
        if 1 <= amount <= balances.get(sender, 0):
            balances[sender] -= amount
            balances[recipient] = balances.get(recipient, 0) + amount

    while len(txs) < cfg.length:
        sender, recipient = rng.sample(range(n_accounts), 2)
        balance = balances.get(sender, 0)
        roll = rng.random()
        if roll < cfg.invalid_fraction or balance == 0:
            emit(sender, recipient, balance + rng.randint(1, 50))
        elif roll < cfg.invalid_fraction + cfg.conflict_fraction and len(txs) + 2 <= cfg.length:
            # Two payments that each fit the balance but not together.
            amount = balance // 2 + 1
            emit(sender, recipient, amount)
            emit(sender, rng.choice([k for k in range(n_accounts) if k != sender]), amount)
        else:
            emit(sender, recipient, rng.randint(1, balance))
    return allocations, txs


def _utxo_txs(cfg: LedgerConfig, rng: random.Random):
    n_genesis = max(4, cfg.length // 2)
    unspent = {k: rng.randint(10, 100) for k in range(n_genesis)}
    allocations = sorted(unspent.items())
    next_key = n_genesis
    txs: list[Transaction] = []

    def fresh() -> int:
        nonlocal next_key
        next_key += 1
        return next_key - 1

    def outputs_for(total: int) -> tuple[tuple[int, int], ...]:
        if total >= 2 and rng.random() < 0.5:
            first = rng.randint(1, total - 1)
            return ((fresh(), first), (fresh(), total - first))
        return ((fresh(), total),)

    def emit(tx: UtxoSpend) -> None:
        txs.append(tx)
        if all(k in unspent for k in tx.inputs) and sum(a for _, a in tx.outputs) <= sum(unspent[k] for k in tx.inputs):
            for k in tx.inputs:
                del unspent[k]
            unspent.update(dict(tx.outputs))

    while len(txs) < cfg.length:
        roll = rng.random()
        pool = sorted(unspent)
        if roll < cfg.invalid_fraction or not pool:
            emit(UtxoSpend((fresh(),), ((fresh(), 1),)))
        elif roll < cfg.invalid_fraction + cfg.conflict_fraction and len(txs) + 2 <= cfg.length:
            key = rng.choice(pool)
            emit(UtxoSpend((key,), ((fresh(), unspent[key]),)))
            emit(UtxoSpend((key,), ((fresh(), 1),)))
        else:
            inputs = tuple(rng.sample(pool, min(len(pool), rng.randint(1, 2))))
            total = sum(unspent[k] for k in inputs)
            emit(UtxoSpend(inputs, outputs_for(total - rng.randint(0, total // 4))))
    return allocations, txs


class LedgerTimeline:
    """Honest ledger views over rounds.

    The union ledger grows by ``alpha`` transactions per round up to
    ``final_length``; node i sees the union ledger as it was ``lag[i]`` rounds
    ago, with every lag at most ``u``. Views are therefore prefixes of one
    another, grow by at most ``alpha`` per round, and include every transaction
    within ``u`` rounds of it entering the union ledger.
    """

    def __init__(self, final_length: int, alpha: int, u: int, nodes: int, seed: int = 0):
        if alpha < 1 or u < 0 or nodes < 1:
            raise InvalidParams("need alpha >= 1, u >= 0 and at least one node")
        rng = random.Random(seed)
        self.final_length = final_length
        self.alpha = alpha
        self.u = u
        self.lags = [rng.randint(0, u) for _ in range(nodes)]

    def union_len(self, r: int) -> int:
        return min(self.final_length, self.alpha * max(0, r))

    def view_len(self, node: int, r: int) -> int:
        return self.union_len(r - self.lags[node])

    def intersection_len(self, r: int) -> int:
        return min(self.view_len(i, r) for i in range(len(self.lags)))

    def entry_round(self, position: int) -> int:
        """First round at which transaction ``position`` (1-based) is in the union ledger."""
        return -(-position // self.alpha)

    def last_round(self) -> int:
        return self.entry_round(self.final_length) + self.u
