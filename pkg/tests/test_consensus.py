import itertools
import math

import pytest

from lazylight.codec import DIGEST_SIZE
from lazylight.consensus import (
    AdjacencyProof,
    BlockChainProver,
    BlockIndex,
    CounterChainOracle,
    CounterChainProver,
    HeaderChainOracle,
    co_query,
    prove_adjacency,
    verify_adjacency,
)
from lazylight.execution import CounterModel
from lazylight.ledger import DirtyLedger, LedgerConfig, build_blocks, generate_ledger
from lazylight.objects import Transfer


def chain_of(n, block_size, arity=2):
    ledger = DirtyLedger([Transfer(0, 1, 1, k) for k in range(n)])
    chain, blocks = build_blocks(ledger, block_size, arity)
    return ledger, chain, blocks


def test_same_block_adjacency():
    ledger, chain, blocks = chain_of(8, 4)
    proof = prove_adjacency(BlockIndex(blocks), ledger[1], ledger[2])
    assert (proof.j, proof.i, proof.j_next, proof.i_next) == (0, 1, 0, 2)
    assert verify_adjacency(chain, ledger[1], ledger[2], proof)


def test_cross_block_adjacency():
    ledger, chain, blocks = chain_of(10, 4)
    proof = prove_adjacency(BlockIndex(blocks), ledger[3], ledger[4])
    assert (proof.j, proof.i, proof.j_next, proof.i_next) == (0, 3, 1, 0)
    assert verify_adjacency(chain, ledger[3], ledger[4], proof)
    # short last block: boundary is its real count, not the padded width
    assert verify_adjacency(chain, ledger[8], ledger[9], prove_adjacency(BlockIndex(blocks), ledger[8], ledger[9]))


def test_genesis_pair():
    ledger, chain, blocks = chain_of(6, 4)
    index = BlockIndex(blocks)
    proof = prove_adjacency(index, None, ledger[0])
    assert proof.proof is None
    assert verify_adjacency(chain, None, ledger[0], proof)
    assert prove_adjacency(index, None, ledger[1]) is None


def test_non_adjacent_refused():
    ledger, chain, blocks = chain_of(8, 4)
    index = BlockIndex(blocks)
    assert prove_adjacency(index, ledger[1], ledger[3]) is None
    assert prove_adjacency(index, ledger[2], ledger[1]) is None
    assert prove_adjacency(index, ledger[1], Transfer(5, 5, 5, 5)) is None


def test_skip_by_two_rejected():
    ledger, chain, blocks = chain_of(8, 4)
    honest = prove_adjacency(BlockIndex(blocks), ledger[1], ledger[2])
    forged = AdjacencyProof(0, 1, honest.proof, 0, 3, blocks[0].tree.prove(3))
    assert not verify_adjacency(chain, ledger[1], ledger[3], forged)


def test_wrong_header_rejected():
    ledger, chain, blocks = chain_of(8, 4)
    p = prove_adjacency(BlockIndex(blocks), ledger[5], ledger[6])
    shifted = AdjacencyProof(p.j - 1, p.i, p.proof, p.j_next - 1, p.i_next, p.proof_next)
    assert not verify_adjacency(chain, ledger[5], ledger[6], shifted)


def test_padding_positions_never_verify():
    ledger, chain, blocks = chain_of(7, 4)
    # block 1 holds three txs padded to four leaves
    last = blocks[1].tree
    assert last.leaf_count == 4
    for tx in ledger:
        fake = AdjacencyProof(1, 2, last.prove(2), 1, 3, last.prove(3))
        assert not verify_adjacency(chain, ledger[6], tx, fake)


@pytest.mark.parametrize("arity", [2, 3])
def test_exhaustive_position_claims_on_four_block_chain(arity):
    """No combination of positions and real proofs makes a non-adjacent pair verify."""
    ledger, chain, blocks = chain_of(14, 4, arity)
    proofs = {(j, i): b.tree.prove(i) for j, b in enumerate(blocks) for i in range(b.tree.leaf_count)}
    positions = list(proofs)
    for a, b in itertools.permutations(range(len(ledger)), 2):
        adjacent = b == a + 1
        accepted = False
        for pa, pb in itertools.product(positions, positions):
            proof = AdjacencyProof(pa[0], pa[1], proofs[pa], pb[0], pb[1], proofs[pb])
            accepted |= verify_adjacency(chain, ledger[a], ledger[b], proof, arity)
        assert accepted == adjacent
    # genesis pair: only the first transaction qualifies
    for b in range(len(ledger)):
        accepted = any(
            verify_adjacency(chain, None, ledger[b], AdjacencyProof(0, 0, None, pb[0], pb[1], proofs[pb]), arity)
            for pb in positions
        )
        assert accepted == (b == 0)


@pytest.mark.parametrize("model", ["account", "utxo"])
def test_completeness_on_generated_ledgers(model):
    gen = generate_ledger(LedgerConfig(length=512, invalid_fraction=0.1, conflict_fraction=0.05, seed=3, model=model))
    chain, blocks = build_blocks(gen.ledger, 16)
    oracle, prover = HeaderChainOracle(chain), BlockChainProver(blocks)
    pairs = [(None, gen.ledger[0])] + list(zip(gen.ledger, gen.ledger[1:]))
    for tx, nxt in pairs:
        assert co_query(oracle, tx, nxt, [lambda: prover.prove(tx, nxt)])


def test_proof_size_budget():
    block_size, arity = 64, 2
    ledger, chain, blocks = chain_of(256, block_size, arity)
    prover = BlockChainProver(blocks)
    depth = math.ceil(math.log2(block_size))
    per_proof = 24 + depth * (16 + DIGEST_SIZE * (arity - 1))
    budget = 33 + 2 * per_proof
    for k in range(len(ledger) - 1):
        assert len(prover.prove(ledger[k], ledger[k + 1])) <= budget


def test_co_query_or_over_provers():
    ledger, chain, blocks = chain_of(8, 4)
    oracle, honest = HeaderChainOracle(chain), BlockChainProver(blocks)
    tx, nxt = ledger[2], ledger[3]
    assert co_query(oracle, tx, nxt, [lambda: None, lambda: b"junk", lambda: honest.prove(tx, nxt)])
    assert not co_query(oracle, tx, nxt, [lambda: None, lambda: None])
    assert not co_query(oracle, ledger[2], ledger[4], [lambda: honest.prove(ledger[2], ledger[3])])
    outsider = Transfer(7, 7, 7, 7)
    assert not co_query(oracle, outsider, nxt, [lambda: honest.prove(outsider, nxt)])


def test_adjacency_proof_round_trip():
    ledger, chain, blocks = chain_of(8, 4)
    index = BlockIndex(blocks)
    for proof in (prove_adjacency(index, ledger[3], ledger[4]), prove_adjacency(index, None, ledger[0])):
        assert AdjacencyProof.decode(proof.encode()) == proof


def test_counter_oracle():
    oracle, prover = CounterChainOracle(100), CounterChainProver(100)
    tx = CounterModel.tx_at
    assert oracle.verify(None, tx(1), prover.prove(None, tx(1)))
    assert oracle.verify(tx(41), tx(42), prover.prove(tx(41), tx(42)))
    assert prover.prove(tx(41), tx(43)) is None
    assert not oracle.verify(tx(41), tx(43), (43).to_bytes(8, "big"))
    assert prover.prove(tx(100), tx(101)) is None
    assert not oracle.verify(tx(5), tx(6), b"short")
