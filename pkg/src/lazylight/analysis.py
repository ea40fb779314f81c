"""Latency/bandwidth model of one challenge game and the best tree degree.

A game over a ledger of size L with m-ary trees descends log L / log m levels.
Each level costs four one-way delays plus shipping m digests of H bits over a
link of C bits per second:

    duration(m) = (ln L / ln m) * (4 * delta + m * H / C) + ln L / C

Setting the derivative in m to zero gives m (ln m - 1) = 4 * delta * C / H,
whose left side is increasing for m > 1, so a bisection finds the root.
"""

from __future__ import annotations

import math

from .errors import InvalidParams

LOWER = 3.0
UPPER = float(2**40)
REL_TOL = 1e-12


def _positive(**values: float) -> None:
    for name, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InvalidParams(f"{name} must be a positive number, got {v!r}")


def game_duration(ledger_size: float, m: float, delta: float, bandwidth: float, hash_bits: int) -> float:
    """Simulated seconds for one game; logarithms are natural."""
    if ledger_size < 2 or m < 2:
        raise InvalidParams("need ledger_size >= 2 and m >= 2")
    log_l = math.log(ledger_size)
    return (log_l / math.log(m)) * (4 * delta + m * hash_bits / bandwidth) + log_l / bandwidth


def stationary_degree(delta: float, bandwidth: float, hash_bits: int) -> float:
    """Real root of m (ln m - 1) = 4 delta C / H, clamped to [3, 2**40]."""
    _positive(delta=delta, bandwidth=bandwidth, hash_bits=hash_bits)
    target = 4 * delta * bandwidth / hash_bits
    lo, hi = LOWER, UPPER
    if lo * (math.log(lo) - 1) >= target:
        return lo
    if hi * (math.log(hi) - 1) <= target:
        return hi
    while hi - lo > REL_TOL * lo:
        mid = (lo + hi) / 2
        if mid * (math.log(mid) - 1) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def optimal_degree(delta: float, bandwidth: float, hash_bits: int, ledger_size: float = 1.5e9) -> int:
    """Integer tree degree minimizing ``game_duration``.

    The real minimizer does not depend on the ledger size; ``ledger_size`` only
    breaks the tie between its floor and ceiling.
    """
    m = stationary_degree(delta, bandwidth, hash_bits)
    candidates = sorted({max(2, math.floor(m)), max(2, math.ceil(m))})
    return min(candidates, key=lambda k: (game_duration(ledger_size, k, delta, bandwidth, hash_bits), k))


def brute_force_degree(
    delta: float, bandwidth: float, hash_bits: int, upper: int = 10**5, ledger_size: float = 1.5e9
) -> int:
    """Exhaustive integer minimizer of ``game_duration`` over [2, upper]."""
    return min(range(2, upper + 1), key=lambda k: (game_duration(ledger_size, k, delta, bandwidth, hash_bits), k))
