import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lazylight.errors import DecodeError, InvalidGenesis
from lazylight.execution import (
    CounterModel,
    ExecutionWitness,
    SmtModel,
    commit,
    default_digests,
    delta,
    delta_star,
    exec_oracle_query,
    genesis_state,
    load_allocations,
    make_witness,
    rebuild_root,
    succinct_delta,
)
from lazylight.objects import OpaqueTx, Transfer, UtxoSpend

DEPTH = 8
KEYS = st.integers(min_value=0, max_value=(1 << DEPTH) - 1)
allocations = st.dictionaries(KEYS, st.integers(min_value=1, max_value=50), max_size=12).map(
    lambda d: sorted(d.items())
)
transfers = st.builds(Transfer, KEYS, KEYS, st.integers(min_value=0, max_value=60), st.integers(0, 10**6))
spends = st.builds(
    UtxoSpend,
    st.lists(KEYS, min_size=0, max_size=3).map(tuple),
    st.lists(st.tuples(KEYS, st.integers(min_value=0, max_value=60)), max_size=3).map(tuple),
)


def balance(state, key):
    return state.get(key) or 0


# -- genesis --------------------------------------------------------------------


def test_empty_genesis_is_default_root():
    state = genesis_state(depth=DEPTH)
    assert commit(state) == default_digests(DEPTH)[DEPTH] == rebuild_root([], DEPTH)


def test_genesis_read_back():
    assert genesis_state([(7, 100)], depth=DEPTH).get(7) == 100


def test_genesis_deterministic():
    alloc = [(1, 5), (9, 3), (200, 1)]
    assert commit(genesis_state(alloc, DEPTH)) == commit(genesis_state(list(reversed(alloc)), DEPTH))


def test_genesis_duplicate_keys():
    with pytest.raises(InvalidGenesis):
        genesis_state([(1, 5), (1, 6)], DEPTH)


def test_load_allocations(tmp_path):
    path = tmp_path / "genesis.json"
    path.write_text(json.dumps([["0a", 5], {"key": "ff", "amount": 7}]))
    assert load_allocations(path) == [(10, 5), (255, 7)]


# -- transitions ----------------------------------------------------------------


def test_overdraft_leaves_state_unchanged():
    state = genesis_state([(1, 10)], DEPTH)
    assert commit(delta(state, Transfer(1, 2, 11, 0))) == commit(state)


def test_transfer_of_full_balance():
    state = delta(genesis_state([(1, 10), (2, 3)], DEPTH), Transfer(1, 2, 10, 0))
    assert balance(state, 1) == 0
    assert balance(state, 2) == 13


def test_zero_amount_transfer_is_invalid():
    state = genesis_state([(1, 10)], DEPTH)
    assert delta(state, Transfer(1, 2, 0, 0)) is state


def test_utxo_double_spend_leaves_state_unchanged():
    state = genesis_state([(1, 10)], DEPTH)
    spend = UtxoSpend((1,), ((2, 10),))
    once = delta(state, spend)
    assert once.get(1) is None and once.get(2) == 10
    again = delta(once, UtxoSpend((1,), ((3, 10),)))
    assert commit(again) == commit(once)


@pytest.mark.parametrize(
    "spend",
    [
        UtxoSpend((), ((2, 1),)),  # no inputs
        UtxoSpend((1, 1), ((2, 1),)),  # repeated input
        UtxoSpend((1,), ((5, 1),)),  # output key already exists
        UtxoSpend((1,), ((2, 11),)),  # creates value
        UtxoSpend((1,), ((2, 0),)),  # zero output
        UtxoSpend((1,), ((1, 1),)),  # output reuses input key
        UtxoSpend((9,), ((2, 1),)),  # missing input
    ],
)
def test_invalid_spends(spend):
    state = genesis_state([(1, 10), (5, 1)], DEPTH)
    assert commit(delta(state, spend)) == commit(state)


def test_spend_beyond_touched_bound_is_invalid():
    state = genesis_state([(k, 1) for k in range(20)], DEPTH)
    spend = UtxoSpend(tuple(range(10)), tuple((100 + k, 1) for k in range(10)))
    assert delta(state, spend) is state


def test_non_state_transactions_are_no_ops():
    state = genesis_state([(1, 10)], DEPTH)
    assert delta(state, OpaqueTx(b"x")) is state
    assert delta(state, None) is state


def test_delta_star_fold():
    st0 = genesis_state([(1, 10)], DEPTH)
    t1, t2 = Transfer(1, 2, 4, 0), Transfer(2, 3, 1, 1)
    assert delta_star(st0, []) is st0
    assert commit(delta_star(st0, [t1, t2])) == commit(delta(delta(st0, t1), t2))


def test_conflicting_pair_first_wins():
    st0 = genesis_state([(1, 10)], DEPTH)
    a, b = UtxoSpend((1,), ((2, 10),)), UtxoSpend((1,), ((3, 10),))
    ab, ba = delta_star(st0, [a, b]), delta_star(st0, [b, a])
    assert ab.get(2) == 10 and ab.get(3) is None
    assert ba.get(3) == 10 and ba.get(2) is None
    assert commit(ab) != commit(ba)


# -- commitments ------------------------------------------------------------------


@given(allocations, st.lists(st.tuples(KEYS, st.none() | st.integers(1, 99)), max_size=20))
def test_incremental_root_equals_rebuild(alloc, writes):
    state = genesis_state(alloc, DEPTH)
    for key, value in writes:
        state = state.with_updates({key: value})
    assert commit(state) == rebuild_root(state.items(), DEPTH)


@given(allocations, allocations)
def test_root_equality_iff_leaf_equality(a, b):
    sa, sb = genesis_state(a, DEPTH), genesis_state(b, DEPTH)
    assert (commit(sa) == commit(sb)) == (sa.items() == sb.items())


def test_one_leaf_difference_changes_commitment():
    rng = random.Random(3)
    for _ in range(50):
        alloc = {rng.randrange(256): rng.randint(1, 9) for _ in range(8)}
        state = genesis_state(sorted(alloc.items()), DEPTH)
        key = rng.choice(sorted(alloc))
        assert commit(state.with_updates({key: alloc[key] + 1})) != commit(state)


# -- witnesses --------------------------------------------------------------------


def test_transfer_witness_shape():
    state = genesis_state([(1, 10)], DEPTH)
    w = make_witness(state, Transfer(1, 2, 3, 0))
    assert w.touched == ((1, 10), (2, None))
    assert all(p.verify(commit(state), DEPTH) for p in w.proofs)
    assert ExecutionWitness.decode(w.encode()) == w


@given(allocations, st.one_of(transfers, spends))
def test_completeness(alloc, tx):
    state = genesis_state(alloc, DEPTH)
    w = make_witness(state, tx)
    assert succinct_delta(commit(state), tx, w, DEPTH) == commit(delta(state, tx))


def test_invalid_tx_returns_pre_root():
    state = genesis_state([(1, 10)], DEPTH)
    tx = Transfer(1, 2, 50, 0)
    assert succinct_delta(commit(state), tx, make_witness(state, tx), DEPTH) == commit(state)


def test_missing_recipient_is_unusable():
    state = genesis_state([(1, 10)], DEPTH)
    tx = Transfer(1, 2, 3, 0)
    w = make_witness(state, tx)
    assert succinct_delta(commit(state), tx, ExecutionWitness(w.proofs[:1]), DEPTH) is None


def test_witness_from_other_state_is_unusable():
    a = genesis_state([(1, 10)], DEPTH)
    b = genesis_state([(1, 10), (3, 3)], DEPTH)
    tx = Transfer(1, 2, 3, 0)
    assert succinct_delta(commit(a), tx, make_witness(b, tx), DEPTH) is None


def test_duplicate_proofs_are_unusable():
    state = genesis_state([(1, 10)], DEPTH)
    tx = Transfer(1, 2, 3, 0)
    w = make_witness(state, tx)
    assert succinct_delta(commit(state), tx, ExecutionWitness(w.proofs + w.proofs[:1]), DEPTH) is None


@pytest.mark.parametrize(
    "tx",
    [Transfer(1, 2, 3, 0), Transfer(1, 2, 30, 0), UtxoSpend((4,), ((9, 2), (10, 1))), UtxoSpend((4, 1), ((11, 13),))],
)
def test_exhaustive_byte_mutation_never_forges(tx):
    """Every single-byte change to an honest witness yields the honest root or nothing."""
    state = genesis_state([(1, 10), (4, 3), (200, 7)], DEPTH)
    model = SmtModel(depth=DEPTH)
    raw = make_witness(state, tx).encode()
    honest = commit(delta(state, tx))
    pre = commit(state)
    for i in range(len(raw)):
        for flip in (0x01, 0x80):
            bad = bytearray(raw)
            bad[i] ^= flip
            assert model.check(pre, tx, bytes(bad)) in (None, honest)


# -- oracle query -------------------------------------------------------------------


def test_exec_oracle_query():
    model = SmtModel(depth=DEPTH)
    state = model.genesis([(1, 10)])
    tx = Transfer(1, 2, 3, 0)
    post = model.commit(model.delta(state, tx))
    honest = lambda: model.witness(state, tx)
    assert exec_oracle_query(tx, model.commit(state), post, honest, model) == (True, "ok")
    off = model.commit(model.delta(state, tx).with_updates({2: 4}))
    assert exec_oracle_query(tx, model.commit(state), off, honest, model) == (False, "commitment mismatch")
    assert exec_oracle_query(tx, model.commit(state), post, lambda: b"\x01\x02", model) == (False, "unusable witness")
    assert exec_oracle_query(tx, model.commit(state), post, lambda: None, model) == (False, "timeout")


def test_garbage_witness_decode_error():
    with pytest.raises(DecodeError):
        ExecutionWitness.decode(b"\x00" * 3)


def test_counter_model():
    model = CounterModel(b"seed")
    pre = model.commitment(4)
    assert model.check(pre, CounterModel.tx_at(5), b"") == model.commitment(5)
    assert model.check(pre, CounterModel.tx_at(7), b"") == pre
    assert model.check(pre, CounterModel.tx_at(5), b"x") is None
    assert model.check(CounterModel(b"other").commitment(4), CounterModel.tx_at(5), b"") is None
    assert model.delta(4, CounterModel.tx_at(5)) == 5
