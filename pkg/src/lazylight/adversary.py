"""Catalog of adversarial provers.

Each strategy builds the data its prover commits to and optionally rewrites
replies. ``expected_reason(role)`` names the verifier outcome the strategy must
end in when it meets an honest opponent in that role.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .codec import DIGEST_SIZE, decode_varint, encode_digests, encode_varint, u64
from .games import Claim, Reason, encode_leaf_reveal
from .merkle import InclusionProof
from .objects import AugmentedEntry
from .prover import GAME_KINDS, Behavior, ProverData
from .world import World

RESPONDER = "responder"
CHALLENGER = "challenger"


class Strategy(Behavior):
    name = "Honest"
    roles: tuple[str, ...] = (RESPONDER, CHALLENGER)

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        return world.honest(view)

    def expected_reason(self, role: str) -> Optional[Reason]:
        return None


Honest = Strategy


@dataclass(frozen=True)
class CorruptLeaf(Strategy):
    """One entry's transaction or state commitment replaced."""

    index: int
    field: str = "state"
    seed: int = 0
    name = "CorruptLeaf"

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        bad = world.corrupt(self.index, self.field, random.Random(self.seed))
        return world.patched({self.index: bad}, view)

    def expected_reason(self, role: str) -> Reason:
        if role == CHALLENGER:
            return Reason.DEFENDED
        if self.index == 0:
            return Reason.BAD_GENESIS
        return Reason.NOT_ADJACENT if self.field == "tx" else Reason.BAD_TRANSITION


@dataclass(frozen=True)
class TruncatedLedger(Strategy):
    """Honest entries, but ``k`` fewer of them than the honest ledger.

    Loses to an honest challenger once ``k`` reaches the monologue cap; below
    the cap the two ledgers are nested and both survive.
    """

    k: int
    name = "TruncatedLedger"
    roles = (RESPONDER,)

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        full = world.length if view is None else view
        return world.honest(full - self.k)

    def expected_reason(self, role: str) -> Reason:
        return Reason.MONOLOGUE_CAP


@dataclass(frozen=True)
class FabricatedSuffix(Strategy):
    """Extends an honest prefix of ``base`` entries by ``extension`` more.

    Extension entries follow the canonical ledger while it lasts (then use
    forged transactions); the one at offset ``bad_at`` carries a wrong state.
    The expected outcome assumes an honest responder that sees exactly
    ``base`` entries, a corrupted position inside the canonical ledger and
    ``bad_at`` below the monologue cap.
    """

    base: int
    extension: int
    bad_at: int
    seed: int = 0
    name = "FabricatedSuffix"
    roles = (CHALLENGER,)

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        rng = random.Random(self.seed)
        entries = list(world.entries[: self.base])
        for offset in range(self.extension):
            pos = self.base + offset
            if pos < world.length:
                entry = world.entries[pos]
            else:
                entry = AugmentedEntry(world.fake_tx(pos), rng.randbytes(DIGEST_SIZE))
            if offset == self.bad_at:
                entry = world.corrupt(pos, "state", rng) if pos < world.length else entry
            entries.append(entry)
        return world.custom(entries)

    def expected_reason(self, role: str) -> Reason:
        return Reason.BAD_TRANSITION


@dataclass(frozen=True)
class Staller(Strategy):
    """Holds a corrupted ledger and stops answering at its ``depth``-th game reply."""

    depth: int
    index: int
    seed: int = 0
    name = "Staller"

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        return CorruptLeaf(self.index, "state", self.seed).build(world, view)

    def intercept(self, prover, msg, reply):
        if msg.kind in GAME_KINDS and prover.game_replies.get(msg.game) == self.depth:
            return None
        return reply

    def expected_reason(self, role: str) -> Reason:
        return Reason.TIMEOUT if role == RESPONDER else Reason.CHALLENGER_TIMEOUT


@dataclass(frozen=True)
class GarbageChildren(Strategy):
    """Holds a corrupted ledger; its ``depth``-th opening returns digests unrelated to the parent."""

    depth: int
    index: int
    seed: int = 0
    name = "GarbageChildren"
    roles = (RESPONDER,)

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        return CorruptLeaf(self.index, "state", self.seed).build(world, view)

    def intercept(self, prover, msg, reply):
        if msg.kind not in ("open-root", "open") or reply is None:
            return reply
        if prover.game_replies.get(msg.game) != self.depth:
            return reply
        rng = random.Random(self.seed * 7919 + self.depth)
        cursor = prover._cursors[(msg.game, "responder")]
        if cursor.level > 0:
            n = len(cursor.tree.child_range(cursor.level, cursor.index))
            return encode_digests([rng.randbytes(DIGEST_SIZE) for _ in range(n)])
        j = cursor.offset + cursor.index
        entry = AugmentedEntry(prover.data.entries[j].tx, rng.randbytes(DIGEST_SIZE))
        prev = None
        if j:
            prev = (prover.data.entries[j - 1], prover.data.mmr.prove(j - 1)[1])
        return encode_leaf_reveal(entry, prev)

    def expected_reason(self, role: str) -> Reason:
        return Reason.HASH_MISMATCH


@dataclass(frozen=True)
class WrongClaimProof(Strategy):
    """Honest ledger, but the last-leaf proof in its claim does not verify."""

    name = "WrongClaimProof"

    def intercept(self, prover, msg, reply):
        if msg.kind != "claim" or reply is None:
            return reply
        claim = Claim.decode(reply)
        proof = claim.last_leaf_proof
        # A level may have no siblings (a lone child in a ragged m-ary tree).
        level = next((k for k, (siblings, _) in enumerate(proof.path) if siblings), None)
        if level is not None:
            path = list(proof.path)
            siblings, pos = path[level]
            flipped = bytes([siblings[0][0] ^ 1]) + siblings[0][1:]
            path[level] = ((flipped,) + siblings[1:], pos)
            proof = InclusionProof(proof.arity, proof.leaf_index, tuple(path))
        else:
            proof = InclusionProof(proof.arity, proof.leaf_index + 1, proof.path)
        return Claim(claim.peaks, claim.length, claim.st_commit, claim.last_entry, proof).encode()

    def expected_reason(self, role: str) -> Reason:
        return Reason.INVALID_CLAIM


@dataclass(frozen=True)
class EquivocatingSizes(Strategy):
    """Honest ledger, but reports one more entry to getsize than its claim commits to."""

    name = "EquivocatingSizes"

    def intercept(self, prover, msg, reply):
        if msg.kind == "getsize" and reply is not None:
            return u64(int.from_bytes(reply, "big") + 1)
        return reply

    def expected_reason(self, role: str) -> Reason:
        return Reason.EQUIVOCATION


@dataclass(frozen=True)
class InvalidQueryChallenger(Strategy):
    """Holds a corrupted ledger; its ``depth``-th query names a nonexistent tree or child."""

    index: int
    depth: int = 1
    seed: int = 0
    name = "InvalidQueryChallenger"
    roles = (CHALLENGER,)

    def build(self, world: World, view: Optional[int] = None) -> ProverData:
        return CorruptLeaf(self.index, "state", self.seed).build(world, view)

    def intercept(self, prover, msg, reply):
        if msg.kind not in ("zoom", "select") or reply is None:
            return reply
        if prover.game_replies.get(msg.game) != self.depth:
            return reply
        if msg.kind == "zoom":
            peaks = Claim.decode(msg.payload).peaks
            return encode_varint(len(peaks.sizes) + 1)
        return encode_varint(prover.data.mmr.arity + decode_varint(reply) + 1)

    def expected_reason(self, role: str) -> Reason:
        return Reason.INVALID_QUERY


CATALOG = (
    CorruptLeaf,
    TruncatedLedger,
    FabricatedSuffix,
    Staller,
    GarbageChildren,
    WrongClaimProof,
    EquivocatingSizes,
    InvalidQueryChallenger,
)


def strategy_from_dict(spec: dict) -> Strategy:
    """Build a strategy from its scenario-file form, e.g. ``{"type": "CorruptLeaf", "index": 5}``."""
    spec = dict(spec)
    kind = spec.pop("type", "Honest")
    if kind == "Honest":
        return Honest()
    for cls in CATALOG:
        if cls.name == kind:
            return cls(**spec)
    raise ValueError(f"unknown strategy {kind!r}")
