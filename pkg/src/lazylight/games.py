"""Bisection and challenge games, refereed by the verifier.

A challenge game runs between two provers whose claims differ. The prover with
the longer ledger is the challenger. It first zooms: it compares the
responder's peaks with its own mountain range until it either finds one
responder tree that disagrees with the matching range of its own leaves, or
finds that the responder's whole ledger is a prefix of its own.

* In the first case the game bisects that tree. Each exchange the responder
  opens the children of the current node, the challenger names the first child
  it disagrees with, and the responder eventually reveals a single leaf. The
  verifier then checks the seven conditions listed on ``Reason``.
* In the second case the challenger recites the entries past the responder's
  end, capped at ``alpha * (u + nu)`` entries, and the verifier checks every
  transition through both oracles.

Query message formats, all sent by the verifier:

=============  ============================================  ==========================================
kind           payload                                       reply
=============  ============================================  ==========================================
getsize        empty                                         u64 length
claim          empty                                         encoded ``Claim``
zoom           responder's encoded ``Claim``                 varint: 0 = recite suffix, k+1 = bisect tree k
select         responder's children (digest list)            varint child index
open-root      varint tree number                            children, or leaf reveal for a 1-leaf tree
open           varint child index                            children, or leaf reveal at the bottom
witness        u64 j, tx, pre-state commitment               execution witness
adjacency      tx, next tx                                   adjacency proof, or empty to refuse
suffix         u64 start, u64 count                          entry list
=============  ============================================  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from .codec import (
    DIGEST_SIZE,
    Reader,
    decode_digests,
    decode_varint,
    decode_whole,
    encode_bytes,
    encode_digests,
    encode_entry,
    encode_tx,
    encode_varint,
    read_entries,
    read_entry,
    u64,
)
from .consensus import ConsensusOracle, co_query
from .errors import DecodeError, NoDisagreement
from .execution import ExecutionModel, exec_oracle_query
from .merkle import (
    InclusionProof,
    MountainRange,
    Peaks,
    inner_digest,
    leaf_digest,
    level_sizes,
    segment_lengths,
    verify_inclusion,
)
from .objects import AugmentedEntry
from .simnet import SimNet, events_to_jsonl


@dataclass(frozen=True)
class Claim:
    peaks: Peaks
    length: int
    st_commit: bytes
    last_entry: AugmentedEntry
    last_leaf_proof: InclusionProof

    def encode(self) -> bytes:
        return (
            self.peaks.encode()
            + u64(self.length)
            + encode_bytes(self.st_commit)
            + encode_bytes(encode_entry(self.last_entry))
            + self.last_leaf_proof.encode()
        )

    @staticmethod
    def decode(data: bytes) -> "Claim":
        def parse(reader: Reader) -> Claim:
            peaks = Peaks.read(reader)
            length = reader.u64()
            st = reader.bytes_field()
            entry = decode_whole(reader.bytes_field(), read_entry)
            return Claim(peaks, length, st, entry, InclusionProof.read(reader))

        return decode_whole(data, parse)

    def same_commitment(self, other: "Claim") -> bool:
        return self.peaks == other.peaks and self.length == other.length


def make_claim(mmr: MountainRange, last_entry: AugmentedEntry) -> Claim:
    _, proof = mmr.prove(mmr.total_leaves - 1)
    return Claim(mmr.peaks(), mmr.total_leaves, last_entry.st, last_entry, proof)


def verify_claim(claim: Claim, m: int) -> bool:
    """Initial check before any game: shape, last-leaf proof and state binding."""
    if claim.length < 1 or list(claim.peaks.sizes) != segment_lengths(claim.length):
        return False
    if claim.st_commit != claim.last_entry.st or len(claim.st_commit) != DIGEST_SIZE:
        return False
    size = claim.peaks.sizes[-1]
    return verify_inclusion(
        claim.last_leaf_proof,
        claim.peaks.roots[-1],
        size - 1,
        encode_entry(claim.last_entry),
        arity=m,
        leaf_count=size,
    )


# -- challenger decisions ---------------------------------------------------


def challenger_next(own: Sequence[bytes], theirs: Sequence[bytes]) -> int:
    for i, (a, b) in enumerate(zip(own, theirs)):
        if a != b:
            return i
    raise NoDisagreement("all children agree")


@dataclass(frozen=True)
class Bisect:
    """Bisect responder tree ``peak`` against the challenger's leaves ``[start, start + size)``."""

    peak: int
    start: int
    size: int


@dataclass(frozen=True)
class Descend:
    tree: int
    peak: int


@dataclass(frozen=True)
class Monologue:
    pass


ZoomResult = Union[Bisect, Monologue]


def peaks_vs_peaks(mine: MountainRange, theirs: Peaks) -> Union[Bisect, Descend, Monologue]:
    own = mine.peaks()
    offsets = theirs.offsets()
    for k, (root, size) in enumerate(zip(theirs.roots, theirs.sizes)):
        if k >= len(own.sizes) or own.sizes[k] < size:
            raise NoDisagreement("responder is longer than the challenger")
        if own.sizes[k] > size:
            return Descend(k, k)
        if own.roots[k] != root:
            return Bisect(k, offsets[k], size)
    return Monologue()


def tree_vs_peak(mine: MountainRange, tree: int, theirs: Peaks, first_peak: int) -> ZoomResult:
    """Descend through challenger tree ``tree`` matching the responder's remaining peaks.

    The descent is over power-of-two leaf ranges (binary halves), which are
    the shapes responder peaks can take; for m = 2 they are exactly tree nodes.
    """
    start = mine.offsets[tree]
    size = mine.trees[tree].leaf_count
    p = first_peak
    remaining = sum(theirs.sizes[p:])
    while p < len(theirs.sizes):
        half = size // 2
        if half > remaining:
            size = half
            continue
        if mine.range_root(start, half) != theirs.roots[p]:
            return Bisect(p, start, half)
        start += half
        remaining -= half
        size = half
        p += 1
    return Monologue()


def zoom(mine: MountainRange, theirs: Peaks) -> ZoomResult:
    step = peaks_vs_peaks(mine, theirs)
    if isinstance(step, Descend):
        return tree_vs_peak(mine, step.tree, theirs, step.peak)
    return step


# -- outcomes ---------------------------------------------------------------


class Result(Enum):
    CHALLENGER_WINS = "ChallengerWins"
    RESPONDER_WINS = "ResponderWins"
    NESTED_MMRS = "NestedMMRs"


class Reason(Enum):
    """Why a game ended. ``condition`` is the numbered verifier check, where one applies.

    1 responder answered in time; 2 replies parse and have the expected shape;
    3 opened children hash to their parent; 4 entry j-1 is proven under the
    right peak; 5 the consensus oracle confirms tx_{j-1}, tx_j are adjacent;
    6 the execution oracle confirms the state transition; 7 entry 0 is the
    genesis entry.
    """

    TIMEOUT = ("timeout", 1)
    SYNTAX = ("syntax", 2)
    HASH_MISMATCH = ("hash-mismatch", 3)
    BAD_PREVIOUS_PROOF = ("bad-previous-proof", 4)
    NOT_ADJACENT = ("not-adjacent", 5)
    BAD_TRANSITION = ("bad-transition", 6)
    BAD_GENESIS = ("bad-genesis", 7)
    EQUIVOCATION = ("equivocation", 2)
    DEFENDED = ("defended", None)
    INVALID_QUERY = ("invalid-query", None)
    CHALLENGER_TIMEOUT = ("challenger-timeout", None)
    INVALID_CLAIM = ("invalid-claim", None)
    MONOLOGUE_CAP = ("monologue-cap", None)
    SUFFIX_MISMATCH = ("suffix-mismatch", None)
    NESTED = ("nested", None)
    IDENTICAL = ("identical-claims", None)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def condition(self) -> Optional[int]:
        return self.value[1]


@dataclass
class Outcome:
    result: Result
    reason: Reason
    challenger: str
    responder: str
    pinpoint: Optional[int] = None
    revealed: tuple[AugmentedEntry, ...] = ()
    exchanges: int = 0
    openings: int = 0
    oracle_queries: int = 0
    suffix_length: int = 0
    messages: int = 0
    bytes: int = 0
    seconds: float = 0.0
    played: bool = True
    events: list[dict] = field(default_factory=list)

    @property
    def loser(self) -> Optional[str]:
        if self.result is Result.CHALLENGER_WINS:
            return self.responder
        if self.result is Result.RESPONDER_WINS:
            return self.challenger
        return None

    @property
    def winner(self) -> Optional[str]:
        if self.result is Result.CHALLENGER_WINS:
            return self.challenger
        if self.result is Result.RESPONDER_WINS:
            return self.responder
        return None

    def transcript(self) -> str:
        return events_to_jsonl(self.events)


class _GameOver(Exception):
    def __init__(self, result: Result, reason: Reason):
        self.result = result
        self.reason = reason


def _responder_fails(reason: Reason) -> _GameOver:
    return _GameOver(Result.CHALLENGER_WINS, reason)


def _challenger_fails(reason: Reason) -> _GameOver:
    return _GameOver(Result.RESPONDER_WINS, reason)


def encode_leaf_reveal(entry: AugmentedEntry, prev: Optional[tuple[AugmentedEntry, InclusionProof]]) -> bytes:
    out = encode_bytes(encode_entry(entry))
    if prev is None:
        return out + b"\x00"
    return out + b"\x01" + encode_bytes(encode_entry(prev[0])) + prev[1].encode()


def decode_leaf_reveal(data: bytes) -> tuple[AugmentedEntry, Optional[tuple[AugmentedEntry, InclusionProof]]]:
    def parse(reader: Reader):
        entry = decode_whole(reader.bytes_field(), read_entry)
        flag = reader.u8()
        if flag == 0:
            return entry, None
        if flag != 1:
            raise DecodeError("bad reveal flag")
        prev = decode_whole(reader.bytes_field(), read_entry)
        return entry, (prev, InclusionProof.read(reader))

    return decode_whole(data, parse)


@dataclass
class _Game:
    gid: int
    challenger: str
    responder: str
    c_claim: Claim
    r_claim: Claim
    outcome: Outcome


class Referee:
    """The verifier: relays every game message and adjudicates.

    ``bystanders`` are further provers the consensus oracle may consult after
    the two players.
    """

    def __init__(
        self,
        net: SimNet,
        genesis_commit: bytes,
        consensus: ConsensusOracle,
        model: ExecutionModel,
        bystanders: Sequence[str] = (),
    ):
        self.net = net
        self.genesis = AugmentedEntry(None, genesis_commit)
        self.consensus = consensus
        self.model = model
        self.bystanders = list(bystanders)
        self.m = net.config.arity
        self._next_game = 1

    # -- claim collection -------------------------------------------------

    def getsize(self, pid: str) -> Optional[int]:
        raw = self.net.ask(pid, "getsize", b"")
        if raw is None or len(raw) != 8:
            return None
        return int.from_bytes(raw, "big")

    def fetch_claim(self, pid: str) -> Optional[Claim]:
        raw = self.net.ask(pid, "claim", b"")
        if raw is None:
            return None
        try:
            return Claim.decode(raw)
        except DecodeError:
            return None

    def claim_ok(self, claim: Optional[Claim], size: Optional[int]) -> Optional[Reason]:
        """None if acceptable, else why not."""
        if claim is None or size is None:
            return Reason.INVALID_CLAIM
        if not verify_claim(claim, self.m):
            return Reason.INVALID_CLAIM
        if claim.length != size:
            return Reason.EQUIVOCATION
        return None

    # -- the challenge game -------------------------------------------------

    def challenge(
        self,
        a: str,
        b: str,
        *,
        sizes: Optional[dict[str, Optional[int]]] = None,
        claims: Optional[dict[str, Optional[Claim]]] = None,
        challenger: Optional[str] = None,
    ) -> Outcome:
        """Run one challenge game between ``a`` and ``b``.

        Sizes and claims are fetched unless supplied. The longer claimant
        challenges; on a tie, ``challenger`` decides (default ``a``).
        """
        sizes = dict(sizes or {})
        claims = dict(claims or {})
        for pid in (a, b):
            if pid not in sizes:
                sizes[pid] = self.getsize(pid)
            if pid not in claims:
                claims[pid] = self.fetch_claim(pid)
        size_a, size_b = sizes[a] or 0, sizes[b] or 0
        if size_a != size_b:
            c, r = (a, b) if size_a > size_b else (b, a)
        else:
            c = challenger if challenger in (a, b) else a
            r = b if c == a else a
        start_events = len(self.net.events)
        before = self.net.counters.snapshot()
        outcome = Outcome(Result.NESTED_MMRS, Reason.NESTED, c, r)

        bad_c = self.claim_ok(claims[c], sizes[c])
        bad_r = self.claim_ok(claims[r], sizes[r])
        if bad_c or bad_r:
            outcome.result = Result.RESPONDER_WINS if bad_c else Result.CHALLENGER_WINS
            outcome.reason = bad_c or bad_r
        elif claims[c].same_commitment(claims[r]):
            outcome.reason = Reason.IDENTICAL
            outcome.played = False
        else:
            game = _Game(self._next_game, c, r, claims[c], claims[r], outcome)
            self._next_game += 1
            try:
                self._play(game)
            except _GameOver as over:
                outcome.result, outcome.reason = over.result, over.reason
        used = self.net.counters.since(before)
        outcome.messages, outcome.bytes, outcome.seconds = used.messages, used.bytes, used.seconds
        self.net.note(
            event="adjudication",
            challenger=c,
            responder=r,
            result=outcome.result.value,
            reason=outcome.reason.label,
            pinpoint=outcome.pinpoint,
        )
        outcome.events = self.net.events[start_events:]
        return outcome

    def _play(self, game: _Game) -> None:
        reply = self.net.ask(game.challenger, "zoom", game.r_claim.encode(), game.gid)
        if reply is None:
            raise _challenger_fails(Reason.CHALLENGER_TIMEOUT)
        try:
            choice = decode_varint(reply)
        except DecodeError:
            raise _challenger_fails(Reason.INVALID_QUERY)
        if choice == 0:
            if game.c_claim.length <= game.r_claim.length:
                raise _challenger_fails(Reason.INVALID_QUERY)
            self._monologue(game)
            return
        k = choice - 1
        if k >= len(game.r_claim.peaks.sizes):
            raise _challenger_fails(Reason.INVALID_QUERY)
        self._bisect(game, k)

    # -- bisection ----------------------------------------------------------

    def _bisect(self, game: _Game, k: int) -> None:
        peaks = game.r_claim.peaks
        size = peaks.sizes[k]
        offset = peaks.offsets()[k]
        sizes = level_sizes(size, self.m)
        max_openings = len(sizes) - 1
        level, idx = max_openings, 0
        known = peaks.roots[k]
        out = game.outcome
        reply = self.net.ask(game.responder, "open-root", encode_varint(k), game.gid)
        out.exchanges += 1
        while True:
            if reply is None:
                raise _responder_fails(Reason.TIMEOUT)
            if level == 0:
                break
            expected = min(self.m, sizes[level - 1] - idx * self.m)
            try:
                children = decode_digests(reply)
            except DecodeError:
                raise _responder_fails(Reason.SYNTAX)
            if len(children) != expected:
                raise _responder_fails(Reason.SYNTAX)
            if inner_digest(children) != known:
                raise _responder_fails(Reason.HASH_MISMATCH)
            out.openings += 1
            assert out.openings <= max_openings
            sel = self.net.ask(game.challenger, "select", encode_digests(children), game.gid)
            if sel is None:
                raise _challenger_fails(Reason.CHALLENGER_TIMEOUT)
            try:
                c = decode_varint(sel)
            except DecodeError:
                raise _challenger_fails(Reason.INVALID_QUERY)
            if c >= expected:
                raise _challenger_fails(Reason.INVALID_QUERY)
            known = children[c]
            idx = idx * self.m + c
            level -= 1
            reply = self.net.ask(game.responder, "open", encode_varint(c), game.gid)
            out.exchanges += 1
        self._judge_leaf(game, offset + idx, known, reply)

    def _judge_leaf(self, game: _Game, j: int, known: bytes, reply: bytes) -> None:
        out = game.outcome
        out.pinpoint = j
        try:
            entry, prev = decode_leaf_reveal(reply)
        except DecodeError:
            raise _responder_fails(Reason.SYNTAX)
        if leaf_digest(encode_entry(entry)) != known:
            raise _responder_fails(Reason.HASH_MISMATCH)
        if (prev is None) != (j == 0):
            raise _responder_fails(Reason.SYNTAX)
        if j == 0:
            out.revealed = (entry,)
            if entry != self.genesis:
                raise _responder_fails(Reason.BAD_GENESIS)
            raise _challenger_fails(Reason.DEFENDED)
        prev_entry, proof = prev
        out.revealed = (prev_entry, entry)
        peaks = game.r_claim.peaks
        tree, local = peaks.locate(j - 1)
        if not verify_inclusion(
            proof,
            peaks.roots[tree],
            local,
            encode_entry(prev_entry),
            arity=self.m,
            leaf_count=peaks.sizes[tree],
        ):
            raise _responder_fails(Reason.BAD_PREVIOUS_PROOF)
        if j - 1 == 0 and prev_entry != self.genesis:
            raise _responder_fails(Reason.BAD_GENESIS)
        if not self._adjacent(game, prev_entry.tx, entry.tx, [game.responder, game.challenger]):
            raise _responder_fails(Reason.NOT_ADJACENT)
        ok, why = self._transition(game, game.responder, j, prev_entry, entry)
        if not ok:
            raise _responder_fails(Reason.TIMEOUT if why == "timeout" else Reason.BAD_TRANSITION)
        raise _challenger_fails(Reason.DEFENDED)

    # -- oracles ------------------------------------------------------------

    def _adjacent(self, game: _Game, tx, tx_next, first: list[str]) -> bool:
        payload = encode_bytes(encode_tx(tx)) + encode_bytes(encode_tx(tx_next))
        order = first + [p for p in self.bystanders if p not in first]
        game.outcome.oracle_queries += 1

        def fetcher(pid: str):
            return lambda: self.net.ask(pid, "adjacency", payload, game.gid) or None

        return co_query(self.consensus, tx, tx_next, (fetcher(p) for p in order))

    def _transition(self, game: _Game, pid: str, j: int, prev: AugmentedEntry, entry: AugmentedEntry):
        payload = u64(j) + encode_bytes(encode_tx(entry.tx)) + encode_bytes(prev.st)
        game.outcome.oracle_queries += 1
        return exec_oracle_query(
            entry.tx,
            prev.st,
            entry.st,
            lambda: self.net.ask(pid, "witness", payload, game.gid),
            self.model,
        )

    # -- suffix monologue ---------------------------------------------------

    def _monologue(self, game: _Game) -> None:
        cap = self.net.config.monologue_cap
        start = game.r_claim.length
        count = min(game.c_claim.length, start + cap) - start
        out = game.outcome
        reply = self.net.ask(game.challenger, "suffix", u64(start) + u64(count), game.gid)
        out.exchanges += 1
        if reply is None:
            raise _challenger_fails(Reason.CHALLENGER_TIMEOUT)
        try:
            entries = decode_whole(reply, read_entries)
        except DecodeError:
            raise _challenger_fails(Reason.SYNTAX)
        if len(entries) != count:
            raise _challenger_fails(Reason.SYNTAX)
        out.suffix_length = count
        prev = game.r_claim.last_entry
        for offset, entry in enumerate(entries):
            out.pinpoint = start + offset
            if not self._adjacent(game, prev.tx, entry.tx, [game.challenger, game.responder]):
                raise _challenger_fails(Reason.NOT_ADJACENT)
            ok, why = self._transition(game, game.challenger, start + offset, prev, entry)
            if not ok:
                raise _challenger_fails(Reason.CHALLENGER_TIMEOUT if why == "timeout" else Reason.BAD_TRANSITION)
            prev = entry
        out.pinpoint = None
        if count >= cap:
            raise _responder_fails(Reason.MONOLOGUE_CAP)
        if entries[-1] != game.c_claim.last_entry:
            raise _challenger_fails(Reason.SUFFIX_MISMATCH)
        raise _GameOver(Result.NESTED_MMRS, Reason.NESTED)


def run_challenge_game(referee: Referee, a: str, b: str, challenger: Optional[str] = None) -> Outcome:
    return referee.challenge(a, b, challenger=challenger)


def run_bisection(referee: Referee, challenger: str, responder: str) -> Outcome:
    """Two-party game between provers committed to ledgers of equal length.

    The challenger's first query names the disputed tree; with a single
    power-of-two ledger that is tree 0.
    """
    return referee.challenge(challenger, responder, challenger=challenger)


def run_suffix_monologue(referee: Referee, challenger: str, responder: str) -> Outcome:
    """Game between a longer challenger and a responder whose ledger is its prefix."""
    return referee.challenge(challenger, responder, challenger=challenger)
