"""Protocol value types: transactions, augmented entries and block headers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union


@dataclass(frozen=True)
class Transfer:
    """Account-model payment. The nonce makes every transfer byte-unique."""

    sender: int
    recipient: int
    amount: int
    nonce: int


@dataclass(frozen=True)
class UtxoSpend:
    """Consumes ``inputs`` and creates ``outputs`` as (key, amount) pairs."""

    inputs: tuple[int, ...]
    outputs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class OpaqueTx:
    """Transaction with no state semantics of its own.

    Used by the counter execution model, where only the position a
    transaction claims matters.
    """

    payload: bytes


Transaction = Union[Transfer, UtxoSpend, OpaqueTx]


@dataclass(frozen=True)
class AugmentedEntry:
    """One (transaction, state commitment) pair. ``tx`` is None only for the genesis entry."""

    tx: Optional[Transaction]
    st: bytes


@dataclass(frozen=True)
class Header:
    height: int
    tx_root: bytes
    tx_count: int
