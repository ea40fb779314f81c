import pytest

from harness import small_world
from lazylight.codec import encode_entry
from lazylight.execution import CounterModel
from lazylight.ledger import LedgerConfig, augment, generate_ledger
from lazylight.merkle import MountainRange, leaf_digest
from lazylight.world import CounterEntries, counter_leaf_digests, counter_world


@pytest.mark.parametrize("count", [1, 2, 7, 300])
@pytest.mark.parametrize("chunk", [1, 5, 1 << 20])
def test_vectorized_counter_leaves_match_per_leaf_hashing(count, chunk):
    model = CounterModel(b"\x00\x01")
    slow = b"".join(leaf_digest(encode_entry(e)) for e in CounterEntries(model, count))
    assert counter_leaf_digests(model, count, chunk) == slow


def test_counter_entries_follow_the_model():
    model = CounterModel(b"s")
    entries = CounterEntries(model, 6)
    st = model.genesis()
    for e in entries[1:]:
        st = model.delta(st, e.tx)
        assert e.st == model.commit(st)
    assert entries[-1] == entries[5]
    with pytest.raises(IndexError):
        entries[6]


def test_counter_world_peaks_match_generic_build():
    world = counter_world(40, 3, seed=2)
    generic = MountainRange.from_leaf_digests(b"".join(leaf_digest(encode_entry(e)) for e in world.entries), 3)
    assert world.honest().mmr.peaks() == generic.peaks()


def test_desk_world_is_the_augmented_ledger():
    cfg = LedgerConfig(length=20, invalid_fraction=0.2, conflict_fraction=0.1, seed=0)
    world = small_world(21, 2)
    gen = generate_ledger(cfg)
    assert list(world.entries) == augment(gen.ledger, gen.st0, gen.model)


def test_honest_views_are_prefixes():
    world = small_world(21, 2)
    short, full = world.honest(9), world.honest()
    assert list(short.entries) == list(full.entries)[:9]
    with pytest.raises(ValueError):
        world.honest(0)
