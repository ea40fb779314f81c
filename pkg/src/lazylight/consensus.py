"""Adjacency oracle: does one transaction immediately follow another on the union ledger?

A prover answers with the block positions of both transactions and their
inclusion proofs; the verifier checks them against its header chain. The pair
(ε, tx) asks whether tx is the first transaction of the ledger.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .codec import Reader, decode_whole, encode_tx, tx_digest, u64
from .errors import DecodeError
from .execution import CounterModel
from .ledger import Block, HeaderChain
from .merkle import InclusionProof, verify_leaf_digest
from .objects import OpaqueTx, Transaction


def _padded_width(count: int) -> int:
    width = 1
    while width < count:
        width *= 2
    return width


@dataclass(frozen=True)
class AdjacencyProof:
    """Positions and inclusion proofs of (tx, tx′); the first half is absent when tx is ε."""

    j: int
    i: int
    proof: Optional[InclusionProof]
    j_next: int
    i_next: int
    proof_next: InclusionProof

    def encode(self) -> bytes:
        head = b"\x00" if self.proof is None else b"\x01" + self.proof.encode()
        return (
            u64(self.j)
            + u64(self.i)
            + head
            + u64(self.j_next)
            + u64(self.i_next)
            + self.proof_next.encode()
        )

    @staticmethod
    def decode(data: bytes) -> "AdjacencyProof":
        def parse(reader: Reader) -> AdjacencyProof:
            j, i = reader.u64(), reader.u64()
            flag = reader.u8()
            if flag not in (0, 1):
                raise DecodeError("bad proof flag")
            proof = InclusionProof.read(reader) if flag else None
            return AdjacencyProof(j, i, proof, reader.u64(), reader.u64(), InclusionProof.read(reader))

        return decode_whole(data, parse)


class BlockIndex:
    """Prover-side lookup from transaction to (block, position)."""

    def __init__(self, blocks: Sequence[Block]):
        self.blocks = list(blocks)
        self.position = {}
        for j, block in enumerate(self.blocks):
            for i, tx in enumerate(block.txs):
                self.position[encode_tx(tx)] = (j, i)


def prove_adjacency(index: BlockIndex, tx: Optional[Transaction], tx_next: Transaction) -> Optional[AdjacencyProof]:
    """Proof that ``tx_next`` follows ``tx`` in the prover's blocks, or None (refusal)."""
    if tx_next is None:
        return None
    nxt = index.position.get(encode_tx(tx_next))
    if nxt is None:
        return None
    j2, i2 = nxt
    proof_next = index.blocks[j2].tree.prove(i2)
    if tx is None:
        if (j2, i2) != (0, 0):
            return None
        return AdjacencyProof(0, 0, None, j2, i2, proof_next)
    cur = index.position.get(encode_tx(tx))
    if cur is None:
        return None
    j, i = cur
    same_block = j2 == j and i2 == i + 1
    crosses = j2 == j + 1 and i == len(index.blocks[j].txs) - 1 and i2 == 0
    if not (same_block or crosses):
        return None
    return AdjacencyProof(j, i, index.blocks[j].tree.prove(i), j2, i2, proof_next)


def _included(chain: HeaderChain, tx: Transaction, j: int, i: int, proof: InclusionProof, arity: int) -> bool:
    if not 0 <= j < len(chain.headers):
        return False
    header = chain.headers[j]
    if not 0 <= i < header.tx_count:
        return False
    return verify_leaf_digest(
        proof, header.tx_root, i, tx_digest(tx), arity=arity, leaf_count=_padded_width(header.tx_count)
    )


def verify_adjacency(
    chain: HeaderChain,
    tx: Optional[Transaction],
    tx_next: Optional[Transaction],
    proof: AdjacencyProof,
    arity: int = 2,
) -> bool:
    if tx_next is None:
        return False
    if not _included(chain, tx_next, proof.j_next, proof.i_next, proof.proof_next, arity):
        return False
    if tx is None:
        return proof.j_next == 0 and proof.i_next == 0
    if proof.proof is None or not _included(chain, tx, proof.j, proof.i, proof.proof, arity):
        return False
    if proof.j_next == proof.j:
        return proof.i_next == proof.i + 1
    return (
        proof.j_next == proof.j + 1
        and proof.i == chain.headers[proof.j].tx_count - 1
        and proof.i_next == 0
    )


class ConsensusOracle:
    """Verifier side: judges one raw adjacency proof."""

    def verify(self, tx: Optional[Transaction], tx_next: Optional[Transaction], raw: bytes) -> bool:
        raise NotImplementedError


class HeaderChainOracle(ConsensusOracle):
    def __init__(self, chain: HeaderChain, arity: int = 2):
        self.chain = chain
        self.arity = arity

    def verify(self, tx, tx_next, raw: bytes) -> bool:
        try:
            proof = AdjacencyProof.decode(raw)
        except DecodeError:
            return False
        return verify_adjacency(self.chain, tx, tx_next, proof, self.arity)


class CounterChainOracle(ConsensusOracle):
    """Oracle for the counter model's canonical ledger, whose transaction p is ``tx_at(p)``.

    The proof is the claimed position of the later transaction.
    """

    def __init__(self, length: int):
        self.length = length

    def verify(self, tx, tx_next, raw: bytes) -> bool:
        if len(raw) != 8:
            return False
        p = int.from_bytes(raw, "big")
        if not 1 <= p <= self.length or tx_next != CounterModel.tx_at(p):
            return False
        return tx is None if p == 1 else tx == CounterModel.tx_at(p - 1)


class ChainProver:
    """Prover side: produces raw adjacency proofs, or None to refuse."""

    def prove(self, tx, tx_next) -> Optional[bytes]:
        raise NotImplementedError


class BlockChainProver(ChainProver):
    def __init__(self, blocks: Sequence[Block]):
        self.index = BlockIndex(blocks)

    def prove(self, tx, tx_next) -> Optional[bytes]:
        proof = prove_adjacency(self.index, tx, tx_next)
        return None if proof is None else proof.encode()


class CounterChainProver(ChainProver):
    def __init__(self, length: int):
        self.length = length

    def prove(self, tx, tx_next) -> Optional[bytes]:
        if not isinstance(tx_next, OpaqueTx) or len(tx_next.payload) != 8:
            return None
        p = int.from_bytes(tx_next.payload, "big")
        raw = u64(p)
        return raw if CounterChainOracle(self.length).verify(tx, tx_next, raw) else None


def co_query(
    oracle: ConsensusOracle,
    tx: Optional[Transaction],
    tx_next: Optional[Transaction],
    provers: Iterable[Callable[[], Optional[bytes]]],
) -> bool:
    """True iff some prover supplies a proof the oracle accepts.

    Each element of ``provers`` fetches one prover's raw reply (None on timeout
    or refusal). Provers are asked in order until one succeeds.
    """
    for fetch in provers:
        raw = fetch()
        if raw is not None and oracle.verify(tx, tx_next, raw):
            return True
    return False
