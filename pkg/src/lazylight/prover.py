"""A prover: the data it commits to, and its replies to verifier queries.

Provers always run the honest algorithms over whatever data they hold; an
adversary is a prover with doctored data, a ``Behavior`` that rewrites or
withholds replies, or both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .codec import (
    Reader,
    decode_digests,
    decode_tx,
    decode_varint,
    decode_whole,
    encode_digests,
    encode_entries,
    encode_varint,
    u64,
)
from .consensus import ChainProver
from .errors import LazyLightError
from .games import Bisect, Claim, challenger_next, encode_leaf_reveal, make_claim, zoom
from .merkle import MerkleTree, MountainRange
from .objects import AugmentedEntry
from .simnet import Message


@dataclass
class ProverData:
    entries: Sequence[AugmentedEntry]
    mmr: MountainRange
    chain: ChainProver
    # Witness for the transition into entry j, given that entry's transaction.
    witness_for: Callable[[int, object], bytes]

    @property
    def length(self) -> int:
        return self.mmr.total_leaves


# Replies a prover owes once a game is under way (claims and oracle lookups excluded).
GAME_KINDS = frozenset({"zoom", "select", "suffix", "open-root", "open", "witness"})


class Behavior:
    """Honest behavior: pass every reply through unchanged."""

    def intercept(self, prover: "Prover", msg: Message, reply: Optional[bytes]) -> Optional[bytes]:
        return reply


@dataclass
class _Cursor:
    tree: MerkleTree
    offset: int
    level: int
    index: int = 0


class Prover:
    def __init__(self, pid: str, data: ProverData, behavior: Optional[Behavior] = None):
        self.pid = pid
        self.data = data
        self.behavior = behavior or Behavior()
        self._cursors: dict[tuple[int, str], _Cursor] = {}
        # Game replies owed so far, per game; lets behaviors act at a given depth.
        self.game_replies: dict[int, int] = {}

    def claim(self) -> Claim:
        return make_claim(self.data.mmr, self.data.entries[self.data.length - 1])

    def handle(self, msg: Message) -> Optional[bytes]:
        if msg.kind in GAME_KINDS:
            self.game_replies[msg.game] = self.game_replies.get(msg.game, 0) + 1
        try:
            reply = getattr(self, "_on_" + msg.kind.replace("-", "_"))(msg)
        except (LazyLightError, IndexError, ValueError, AttributeError):
            reply = None
        return self.behavior.intercept(self, msg, reply)

    # -- claim ------------------------------------------------------------

    def _on_getsize(self, msg: Message) -> bytes:
        return u64(self.data.length)

    def _on_claim(self, msg: Message) -> bytes:
        return self.claim().encode()

    # -- challenger side ----------------------------------------------------

    def _on_zoom(self, msg: Message) -> bytes:
        theirs = Claim.decode(msg.payload).peaks
        decision = zoom(self.data.mmr, theirs)
        if not isinstance(decision, Bisect):
            return encode_varint(0)
        tree = self.data.mmr.range_tree(decision.start, decision.size)
        self._cursors[(msg.game, "challenger")] = _Cursor(tree, decision.start, tree.height)
        return encode_varint(decision.peak + 1)

    def _on_select(self, msg: Message) -> bytes:
        cur = self._cursors[(msg.game, "challenger")]
        theirs = decode_digests(msg.payload)
        c = challenger_next(cur.tree.children(cur.level, cur.index), theirs)
        cur.index = cur.tree.child_range(cur.level, cur.index).start + c
        cur.level -= 1
        return encode_varint(c)

    def _on_suffix(self, msg: Message) -> bytes:
        reader = Reader(msg.payload)
        start, count = reader.u64(), reader.u64()
        reader.done()
        if start + count > self.data.length:
            raise IndexError("suffix beyond ledger")
        return encode_entries([self.data.entries[i] for i in range(start, start + count)])

    # -- responder side -----------------------------------------------------

    def _open(self, cur: _Cursor) -> bytes:
        if cur.level > 0:
            return encode_digests(cur.tree.children(cur.level, cur.index))
        j = cur.offset + cur.index
        entries = self.data.entries
        if j == 0:
            return encode_leaf_reveal(entries[0], None)
        _, proof = self.data.mmr.prove(j - 1)
        return encode_leaf_reveal(entries[j], (entries[j - 1], proof))

    def _on_open_root(self, msg: Message) -> bytes:
        k = decode_varint(msg.payload)
        tree = self.data.mmr.trees[k]
        cur = _Cursor(tree, self.data.mmr.offsets[k], tree.height)
        self._cursors[(msg.game, "responder")] = cur
        return self._open(cur)

    def _on_open(self, msg: Message) -> bytes:
        cur = self._cursors[(msg.game, "responder")]
        c = decode_varint(msg.payload)
        group = cur.tree.child_range(cur.level, cur.index)
        if not 0 <= c < len(group):
            raise IndexError("child index outside group")
        cur.index = group.start + c
        cur.level -= 1
        return self._open(cur)

    # -- oracle support -----------------------------------------------------

    def _on_witness(self, msg: Message) -> bytes:
        reader = Reader(msg.payload)
        j = reader.u64()
        tx = decode_tx(reader.bytes_field())
        reader.bytes_field()
        reader.done()
        return self.data.witness_for(j, tx)

    def _on_adjacency(self, msg: Message) -> bytes:
        def parse(reader: Reader):
            return decode_tx(reader.bytes_field()), decode_tx(reader.bytes_field())

        tx, tx_next = decode_whole(msg.payload, parse)
        return self.data.chain.prove(tx, tx_next) or b""
