import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harness import arena, many_games_players, small_world
from lazylight.adversary import CorruptLeaf, EquivocatingSizes, Honest, Staller, TruncatedLedger
from lazylight.errors import NoProvers
from lazylight.games import Reason, Result
from lazylight.execution import SmtModel
from lazylight.ledger import DirtyLedger, StateHistory
from lazylight.objects import Transfer
from lazylight.tournament import final_state_query, honest_loss_reasons, run_tournament, verify_state_element
from lazylight.world import ledger_world

ENTRIES = 24


@pytest.fixture(scope="module")
def world():
    return small_world(ENTRIES, 2)


def play(world, players, **net):
    referee, provers = arena(world, players, **net)
    return run_tournament(referee, list(players)), provers


def test_no_provers(world):
    referee, _ = arena(world, {})
    with pytest.raises(NoProvers):
        run_tournament(referee, [])


def test_single_prover_wins_without_games(world):
    result, provers = play(world, {"solo": Honest()})
    assert result.winner == "solo"
    assert result.games_played == 0
    assert result.st_commit == provers["solo"].claim().st_commit


def test_corrupted_equal_size_provers(world):
    players = {"honest": Honest()} | {f"adv{k}": CorruptLeaf(k + 3, seed=k) for k in range(4)}
    result, _ = play(world, players)
    assert result.winner == "honest"
    assert result.games_played == 4
    assert sorted(result.eliminated) == ["adv0", "adv1", "adv2", "adv3"]
    assert honest_loss_reasons(result, {"honest"}) == []


def test_honest_listed_last_still_wins(world):
    players = {f"adv{k}": CorruptLeaf(k + 1) for k in range(3)} | {"honest": Honest()}
    result, _ = play(world, players)
    assert result.winner == "honest"
    assert result.games_played == 3


def test_all_honest_only_nested_games(world):
    players = {f"h{k}": (Honest(), ENTRIES - k) for k in range(4)}
    result, _ = play(world, players, alpha=4, u=2)
    assert result.games_played == 3
    assert all(o.result is Result.NESTED_MMRS for o in result.outcomes)
    assert result.eliminated == []
    assert result.winner == "h0"


def test_identical_claims_not_counted(world):
    players = {"a": Honest(), "b": Honest(), "c": CorruptLeaf(7)}
    result, _ = play(world, players)
    assert [o.played for o in result.outcomes] == [False, True]
    assert result.games_played == 1
    assert result.winner in {"a", "b"}


def test_equivocator_and_staller_are_removed(world):
    players = {"eq": EquivocatingSizes(), "stall": Staller(2, 5), "honest": Honest(), "short": TruncatedLedger(9)}
    result, _ = play(world, players, alpha=2, u=2)
    assert result.winner == "honest"
    assert set(result.eliminated) == {"eq", "stall", "short"}
    reasons = {o.loser: o.reason for o in result.outcomes}
    assert reasons["eq"] is Reason.EQUIVOCATION
    assert reasons["short"] is Reason.MONOLOGUE_CAP


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_game_count_bound_is_tight_within_two(n):
    world = small_world(32, 2)
    result, _ = play(world, many_games_players(n, 32), alpha=16, u=2)
    assert result.winner == "honest"
    assert result.games_played == 2 * n - 3
    assert result.games_played <= 2 * n - 1


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.integers(2, 7))
def test_random_tournaments_keep_the_honest_state(seed, n):
    world = small_world(ENTRIES, 2)
    rng = random.Random(seed)
    alpha, u = 2, 3
    players = {}
    honest_views = []
    for k in range(n):
        if k == 0 or rng.random() < 0.3:
            view = ENTRIES - rng.randint(0, alpha * u - 1)
            players[f"h{k}"] = (Honest(), view)
            honest_views.append(view)
        else:
            players[f"x{k}"] = (CorruptLeaf(rng.randrange(ENTRIES), rng.choice(["state", "tx"]), seed), None)
    order = list(players)
    rng.shuffle(order)
    result, _ = play(world, {p: players[p] for p in order}, alpha=alpha, u=u)
    assert result.games_played <= 2 * n - 1
    assert honest_loss_reasons(result, {p for p in players if p.startswith("h")}) == []
    # The surviving state lies between the shortest and longest honest views.
    allowed = {world.entries[v - 1].st for v in range(min(honest_views), max(honest_views) + 1)}
    assert result.st_commit in allowed
    # Eliminated provers never come back.
    assert len(set(result.eliminated)) == len(result.eliminated)
    assert result.winner not in result.eliminated


def test_round_count_bound(world):
    n = 6
    result, _ = play(world, many_games_players(n, ENTRIES), alpha=16, u=2)
    assert result.total_rounds <= 2 * n * math.log2(ENTRIES + 16 * 2)


# -- state queries ------------------------------------------------------------


def replay_balances(world):
    """Plain-dict replay of the account rules, independent of the sparse tree."""
    balances = {}
    for k in range(1 << 12):
        v = world.st0.get(k)
        if v is not None:
            balances[k] = v
    touched = set()
    for entry in world.entries[1:]:
        tx = entry.tx
        assert isinstance(tx, Transfer)
        if tx.amount >= 1 and balances.get(tx.sender, 0) >= tx.amount and tx.sender != tx.recipient:
            balances[tx.sender] -= tx.amount
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
            touched |= {tx.sender, tx.recipient}
    return {k: v for k, v in balances.items() if v}, touched


def test_final_state_query_matches_replay(world):
    result, _ = play(world, {"honest": Honest(), "adv": CorruptLeaf(10)})
    state = StateHistory(world.model, world.st0, [e.tx for e in world.entries[1:]]).state_at(ENTRIES - 1)
    balances, touched = replay_balances(world)
    recipient = next(e.tx.recipient for e in reversed(world.entries[1:]) if e.tx.recipient in touched)
    value, proof = final_state_query(state, recipient)
    assert value == balances.get(recipient)
    assert verify_state_element(proof, result.st_commit, world.model.depth)


def test_untouched_and_absent_keys():
    model = SmtModel(depth=16)
    st0 = model.genesis([(1, 100), (2, 100), (9, 42)])
    ledger = DirtyLedger([Transfer(1, 2, 30, 0), Transfer(2, 1, 500, 1), Transfer(2, 3, 5, 2)])
    world = ledger_world(ledger, model, st0, 2)
    result, _ = play(world, {"honest": Honest(), "adv": CorruptLeaf(2)})
    state = StateHistory(model, st0, list(ledger)).state_at(3)
    assert final_state_query(state, 2)[0] == 125
    value, proof = final_state_query(state, 9)
    assert value == 42
    assert verify_state_element(proof, result.st_commit, model.depth)
    value, proof = final_state_query(state, 77)
    assert value is None
    assert verify_state_element(proof, result.st_commit, model.depth)


def test_proof_fails_against_losing_commitment(world):
    result, provers = play(world, {"honest": Honest(), "adv": CorruptLeaf(ENTRIES - 1)})
    assert result.winner == "honest"
    state = StateHistory(world.model, world.st0, [e.tx for e in world.entries[1:]]).state_at(ENTRIES - 1)
    _, proof = final_state_query(state, world.entries[-1].tx.sender)
    assert not verify_state_element(proof, provers["adv"].claim().st_commit, world.model.depth)
