"""Hypothesis strategies for protocol objects."""

from hypothesis import strategies as st

from lazylight.codec import DIGEST_SIZE
from lazylight.objects import AugmentedEntry, Header, OpaqueTx, Transfer, UtxoSpend

U64 = st.integers(min_value=0, max_value=2**64 - 1)
digests = st.binary(min_size=DIGEST_SIZE, max_size=DIGEST_SIZE)

transfers = st.builds(Transfer, U64, U64, U64, U64)
utxo_spends = st.builds(
    UtxoSpend,
    st.lists(U64, max_size=4).map(tuple),
    st.lists(st.tuples(U64, U64), max_size=4).map(tuple),
)
opaque_txs = st.builds(OpaqueTx, st.binary(max_size=40))
transactions = st.one_of(transfers, utxo_spends, opaque_txs)
entries = st.builds(AugmentedEntry, st.none() | transactions, digests)
headers = st.builds(Header, U64, digests, U64)
