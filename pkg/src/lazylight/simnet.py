"""Deterministic synchronous network.

A message sent during round r is delivered at the start of round r+1, in
(sender id, sequence number) order. A party that receives a query must answer
during the round it receives it; if it does not, it is marked timed out at the
next round boundary. Every message passes through the verifier, and its cost is
charged as latency plus transmission time:

* verifier to prover: ``delta + bits / bandwidth``
* prover to verifier: ``delta``

so one challenger/responder exchange costs ``4*delta + (query + response bits) / bandwidth``.
Time is simulated; nothing here reads the wall clock.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import InvalidParams

VERIFIER = "verifier"


@dataclass(frozen=True)
class NetworkConfig:
    delta: float = 0.013
    bandwidth: float = 290e6
    arity: int = 2
    alpha: int = 1
    u: int = 0
    nu: int = 0
    seed: int = 0

    def __post_init__(self):
        if not (self.delta > 0 and self.bandwidth > 0):
            raise InvalidParams("latency and bandwidth must be positive")
        if self.arity < 2 or self.alpha < 1 or self.u < 0 or self.nu < 0:
            raise InvalidParams("need arity >= 2, alpha >= 1, u >= 0, nu >= 0")

    @property
    def monologue_cap(self) -> int:
        return self.alpha * (self.u + self.nu)


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    recipient: str
    kind: str
    payload: bytes
    sent_round: int
    game: int = 0
    expects_reply: bool = False
    reply_to: Optional[int] = None


def account_cost(message: Message, config: NetworkConfig) -> tuple[int, float]:
    """(bits, simulated seconds) charged for one hop."""
    bits = 8 * len(message.payload)
    if message.sender == VERIFIER:
        return bits, config.delta + bits / config.bandwidth
    return bits, config.delta


@dataclass
class Counters:
    messages: int = 0
    bytes: int = 0
    seconds: float = 0.0

    def snapshot(self) -> "Counters":
        return Counters(self.messages, self.bytes, self.seconds)

    def since(self, earlier: "Counters") -> "Counters":
        return Counters(self.messages - earlier.messages, self.bytes - earlier.bytes, self.seconds - earlier.seconds)


@dataclass
class SimNet:
    config: NetworkConfig
    round: int = 0
    counters: Counters = field(default_factory=Counters)
    events: list[dict] = field(default_factory=list)
    timed_out: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        self._seq = 0
        self._in_flight: list[Message] = []
        self._handlers: dict[str, Callable[[Message], Optional[bytes]]] = {}
        self._owed: dict[tuple[str, int], int] = {}
        self._inbox: dict[str, list[Message]] = {}

    def register(self, party: str, handler: Callable[[Message], Optional[bytes]]) -> None:
        self._handlers[party] = handler

    def send(
        self,
        sender: str,
        recipient: str,
        kind: str,
        payload: bytes,
        *,
        game: int = 0,
        expects_reply: bool = False,
        reply_to: Optional[int] = None,
    ) -> Message:
        msg = Message(self._seq, sender, recipient, kind, bytes(payload), self.round, game, expects_reply, reply_to)
        self._seq += 1
        if reply_to is not None:
            self._owed.pop((sender, reply_to), None)
        self._in_flight.append(msg)
        bits, seconds = account_cost(msg, self.config)
        self.counters.messages += 1
        self.counters.bytes += bits // 8
        self.counters.seconds += seconds
        return msg

    def advance_round(self) -> list[Message]:
        self.round += 1
        for (party, seq), due in sorted(self._owed.items()):
            if due < self.round:
                del self._owed[(party, seq)]
                self.timed_out.append((party, self.round))
                self.events.append({"round": self.round, "event": "timeout", "party": party, "query": seq})
        delivered = sorted(self._in_flight, key=lambda m: (m.sender, m.seq))
        self._in_flight = []
        for msg in delivered:
            self.events.append(
                {
                    "round": self.round,
                    "event": "deliver",
                    "game": msg.game,
                    "from": msg.sender,
                    "to": msg.recipient,
                    "kind": msg.kind,
                    "bytes": len(msg.payload),
                    "payload_sha256": hashlib.sha256(msg.payload).hexdigest(),
                }
            )
            if msg.expects_reply:
                self._owed[(msg.recipient, msg.seq)] = self.round
            handler = self._handlers.get(msg.recipient)
            if handler is None:
                self._inbox.setdefault(msg.recipient, []).append(msg)
                continue
            reply = handler(msg)
            if reply is not None:
                self.send(msg.recipient, msg.sender, msg.kind, reply, game=msg.game, reply_to=msg.seq)
        return delivered

    def inbox(self, party: str) -> list[Message]:
        return self._inbox.setdefault(party, [])

    def ask(self, recipient: str, kind: str, payload: bytes, game: int = 0) -> Optional[bytes]:
        """Verifier sends a query and waits the one round allowed for the answer.

        Returns the reply payload, or None if the recipient timed out.
        """
        query = self.send(VERIFIER, recipient, kind, payload, game=game, expects_reply=True)
        self.advance_round()
        self.advance_round()
        inbox = self.inbox(VERIFIER)
        for k, msg in enumerate(inbox):
            if msg.reply_to == query.seq:
                del inbox[k]
                return msg.payload
        return None

    def note(self, **event) -> None:
        self.events.append({"round": self.round, **event})


def events_to_jsonl(events: list[dict]) -> str:
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in events)
