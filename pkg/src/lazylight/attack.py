"""Alternating-invalidation attack on light clients that learn validity from revealed transactions.

The ledger holds tx_n, ..., tx_1 in that order. Each tx_i spends two outputs:
its private one and the private one of tx_{i-1}. Executing the ledger,
tx_n is valid, tx_{n-1} double-spends and is invalid, tx_{n-2} is valid
again, and so on; tx_1 ends up valid exactly when n is odd.

A client that learns validity from conflicting transactions shown to it can
be dragged through the whole chain: every reveal of an invalidator can be
answered by revealing that transaction's own invalidator. The challenge game
instead settles the final state with a logarithmic number of messages, after
which one state proof answers the question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidParams
from .execution import SmtModel
from .ledger import DirtyLedger, StateHistory
from .objects import AugmentedEntry, UtxoSpend
from .games import Referee
from .prover import Prover
from .simnet import NetworkConfig, SimNet
from .tournament import final_state_query, run_tournament, verify_state_element
from .world import World, ledger_world

AMOUNT = 1


def chain_keys(n: int, i: int) -> tuple[int, int, int]:
    """(private input, borrowed input, output) keys of tx_i."""
    private = i
    borrowed = i - 1 if i >= 2 else 0
    return private, borrowed, n + i


def attack_ledger(n: int) -> tuple[DirtyLedger, list[tuple[int, int]]]:
    """The ledger tx_n, ..., tx_1 and the genesis allocations it spends from."""
    if n < 2:
        raise InvalidParams("the attack chain needs n >= 2")
    txs = []
    for i in range(n, 0, -1):
        private, borrowed, out = chain_keys(n, i)
        txs.append(UtxoSpend((private, borrowed), ((out, 2 * AMOUNT),)))
    allocations = [(k, AMOUNT) for k in range(0, n + 1)]
    return DirtyLedger(txs), allocations


def executed_validity(n: int) -> bool:
    """Whether tx_1 is valid under full execution of the attack ledger."""
    ledger, allocations = attack_ledger(n)
    model = SmtModel()
    state = model.genesis(allocations)
    for tx in ledger:
        state = model.delta(state, tx)
    return state.get(chain_keys(n, 1)[2]) is not None


def naive_spv_reveals(ledger: Sequence[UtxoSpend], target: int) -> tuple[int, bool]:
    """Reveal invalidators of ``ledger[target]`` until none is left.

    Each round shows the client an earlier transaction that spends an input of
    the one revealed last. Returns the number of reveals and the validity the
    client finally infers (valid iff an even number of invalidators was shown).
    """
    reveals = 0
    current = target
    while True:
        spent = set(ledger[current].inputs)
        earlier = [k for k in range(current) if spent & set(ledger[k].inputs)]
        if not earlier:
            break
        current = earlier[-1]
        reveals += 1
    return reveals, reveals % 2 == 0


@dataclass(frozen=True)
class AttackReport:
    n: int
    m: int
    executed_valid: bool
    naive_reveals: int
    naive_valid: bool
    game_messages: int
    game_exchanges: int
    claim_messages: int
    protocol_valid: bool
    proof_ok: bool
    winner: str

    @property
    def message_bound(self) -> int:
        return 4 * math.ceil(math.log(self.n + 1, self.m)) + 8

    def lines(self) -> list[str]:
        return [
            f"n={self.n} m={self.m}",
            f"tx_1 valid under full execution: {self.executed_valid}",
            f"naive light client: {self.naive_reveals} reveals, infers valid={self.naive_valid}",
            f"challenge game: {self.game_messages} messages ({self.game_exchanges} exchanges), "
            f"bound {self.message_bound}, winner {self.winner}; "
            f"{self.claim_messages} more to collect sizes and claims",
            f"state query: valid={self.protocol_valid}, proof verifies={self.proof_ok}",
        ]


def liar_entries(world: World, ledger: Sequence[UtxoSpend]) -> list[AugmentedEntry]:
    """Augmented ledger of a prover that treats tx_n as invalid and executes the rest.

    Skipping tx_n shifts the parity of the whole chain, so tx_1 flips too,
    and the ledger departs from the honest one already at entry 1.
    """
    model = world.model
    state = world.st0
    entries = [world.entries[0], AugmentedEntry(ledger[0], model.commit(state))]
    for tx in ledger[1:]:
        state = model.delta(state, tx)
        entries.append(AugmentedEntry(tx, model.commit(state)))
    return entries


def run_attack_demo(n: int, m: int = 2, config: Optional[NetworkConfig] = None) -> AttackReport:
    ledger, allocations = attack_ledger(n)
    model = SmtModel()
    st0 = model.genesis(allocations)
    world = ledger_world(ledger, model, st0, m)
    history = StateHistory(model, st0, list(ledger))

    reveals, naive_valid = naive_spv_reveals(ledger, n - 1)

    net = SimNet(config or NetworkConfig(arity=m))
    honest = Prover("honest", world.honest())
    liar = Prover("liar", world.custom(liar_entries(world, ledger)))
    for p in (honest, liar):
        net.register(p.pid, p.handle)
    referee = Referee(net, world.genesis_commit, world.consensus, model, bystanders=["honest", "liar"])
    result = run_tournament(referee, ["liar", "honest"])
    game = result.games[0]

    out_key = chain_keys(n, 1)[2]
    value, proof = final_state_query(history.state_at(n), out_key)
    proof_ok = result.st_commit is not None and verify_state_element(proof, result.st_commit, model.depth)
    return AttackReport(
        n=n,
        m=m,
        executed_valid=executed_validity(n),
        naive_reveals=reveals,
        naive_valid=naive_valid,
        game_messages=game.messages,
        game_exchanges=game.exchanges,
        claim_messages=result.messages - game.messages,
        protocol_valid=value is not None,
        proof_ok=proof_ok,
        winner=result.winner,
    )
