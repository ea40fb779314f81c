"""Elimination tournament over many provers, and the final state lookup."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import NoProvers
from .execution import SmtProof, SparseState
from .games import Claim, Outcome, Reason, Referee, Result


@dataclass
class TournamentResult:
    winner: str
    claim: Optional[Claim]
    outcomes: list[Outcome] = field(default_factory=list)
    eliminated: list[str] = field(default_factory=list)
    sizes: dict[str, Optional[int]] = field(default_factory=dict)
    messages: int = 0
    bytes: int = 0
    seconds: float = 0.0

    @property
    def st_commit(self) -> Optional[bytes]:
        return None if self.claim is None else self.claim.st_commit

    @property
    def games(self) -> list[Outcome]:
        return [o for o in self.outcomes if o.played]

    @property
    def games_played(self) -> int:
        return len(self.games)

    @property
    def total_rounds(self) -> int:
        return sum(o.exchanges for o in self.games)


def run_tournament(referee: Referee, provers: Sequence[str]) -> TournamentResult:
    """Run the tournament; ``provers`` are ordered by decreasing ``getsize`` answer.

    Provers with equal sizes keep their given order. Each newcomer is played
    against the current largest survivor; on equal sizes the newcomer
    challenges.
    """
    if not provers:
        raise NoProvers("a tournament needs at least one prover")
    net = referee.net
    before = net.counters.snapshot()
    sizes = {p: referee.getsize(p) for p in provers}
    order = sorted(provers, key=lambda p: -1 if sizes[p] is None else -sizes[p])
    claims = {p: referee.fetch_claim(p) for p in order}
    result = TournamentResult(order[0], None, sizes=sizes)

    def size_of(p: str) -> int:
        return -1 if sizes[p] is None else sizes[p]

    survivors = [order[0]]
    largest = order[0]
    for newcomer in order[1:]:
        while True:
            if size_of(largest) > size_of(newcomer):
                outcome = referee.challenge(largest, newcomer, sizes=sizes, claims=claims, challenger=largest)
            else:
                outcome = referee.challenge(newcomer, largest, sizes=sizes, claims=claims, challenger=newcomer)
            result.outcomes.append(outcome)
            if outcome.result is Result.NESTED_MMRS:
                survivors.append(newcomer)
                break
            if outcome.loser != largest:
                result.eliminated.append(newcomer)
                break
            survivors.remove(largest)
            result.eliminated.append(largest)
            if not survivors:
                break
            largest = max(survivors, key=size_of)
        if not survivors:
            survivors = [newcomer]
            largest = newcomer
    result.winner = largest
    result.claim = claims[largest]
    used = net.counters.since(before)
    result.messages, result.bytes, result.seconds = used.messages, used.bytes, used.seconds
    return result


def final_state_query(state: SparseState, key: int) -> tuple[Optional[int], SmtProof]:
    """Value of ``key`` in the winner's state with its (non-)inclusion proof."""
    proof = state.prove(key)
    return proof.value, proof


def verify_state_element(proof: SmtProof, commitment: bytes, depth: int) -> bool:
    return proof.verify(commitment, depth)


def honest_loss_reasons(result: TournamentResult, honest: set[str]) -> list[Reason]:
    """Reasons of any game an honest prover lost; empty in every correct run."""
    return [o.reason for o in result.outcomes if o.loser in honest]
