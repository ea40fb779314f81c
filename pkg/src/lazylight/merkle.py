"""m-ary Merkle trees over power-of-two leaf counts and Merkle Mountain Ranges.

Each level of a tree is stored as one contiguous byte string holding the
concatenated node digests, so a ten-million-leaf tree costs little more than its
raw digests. A tree may carry a small override map on top of shared levels,
which makes "the same tree with one leaf replaced" cheap; this is how corrupted
copies of a large ledger are produced.

Level 0 holds the leaves. A node at level t and index i has children at level
t-1 with indices ``i*m .. min(i*m + m, count(t-1)) - 1``; the last group on a
level may be ragged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .codec import (
    DIGEST_SIZE,
    Reader,
    Tag,
    decode_whole,
    encode,
    encode_bytes,
    encode_digests,
    hash_tagged,
    new_tagged_hasher,
    u64,
)
from .errors import IndexOutOfRange, InvalidLength, NotInnerNode, NotPowerOfTwo

D = DIGEST_SIZE


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def segment_lengths(total: int) -> list[int]:
    """Set bits of ``total`` as powers of two, largest first."""
    if total < 1:
        raise InvalidLength("an augmented ledger has at least the genesis entry")
    return [1 << b for b in range(total.bit_length() - 1, -1, -1) if total >> b & 1]


def level_sizes(leaf_count: int, m: int) -> list[int]:
    sizes = [leaf_count]
    while sizes[-1] > 1:
        sizes.append(-(-sizes[-1] // m))
    return sizes


def tree_height(leaf_count: int, m: int) -> int:
    return len(level_sizes(leaf_count, m)) - 1


def leaf_digest(value: bytes) -> bytes:
    return hash_tagged(Tag.LEAF, encode_bytes(value))


def inner_digest(children: Sequence[bytes]) -> bytes:
    return hash_tagged(Tag.INNER, encode_digests(children))


def _hash_level(level: bytes, m: int) -> bytes:
    count = len(level) // D
    view = memoryview(level)
    base = new_tagged_hasher(Tag.INNER)
    out = []
    for start in range(0, count, m):
        n = min(m, count - start)
        h = base.copy()
        h.update(u64(n))
        h.update(view[start * D : (start + n) * D])
        out.append(h.digest())
    return b"".join(out)


def _build_levels(leaves: bytes, m: int) -> list[bytes]:
    levels = [leaves]
    while len(levels[-1]) > D:
        levels.append(_hash_level(levels[-1], m))
    return levels


@dataclass(frozen=True)
class InclusionProof:
    """Authentication path for one leaf.

    ``path[t]`` holds the siblings of the level-t node on the way to the root
    (the node itself excluded) and that node's position inside its group.
    """

    arity: int
    leaf_index: int
    path: tuple[tuple[tuple[bytes, ...], int], ...]

    def encode(self) -> bytes:
        parts = [u64(self.arity), u64(self.leaf_index), u64(len(self.path))]
        for siblings, pos in self.path:
            parts.append(u64(pos))
            parts.append(encode_digests(siblings))
        return b"".join(parts)

    @staticmethod
    def read(reader: Reader) -> "InclusionProof":
        arity = reader.u64()
        index = reader.u64()
        path = []
        for _ in range(reader.count(16)):
            pos = reader.u64()
            path.append((tuple(reader.digests()), pos))
        return InclusionProof(arity, index, tuple(path))

    @staticmethod
    def decode(data: bytes) -> "InclusionProof":
        return decode_whole(data, InclusionProof.read)


class MerkleTree:
    """Immutable m-ary Merkle tree; see the module docstring for the layout."""

    __slots__ = ("arity", "leaf_count", "_levels", "_overrides", "_sizes")

    def __init__(
        self,
        arity: int,
        levels: Sequence[bytes],
        overrides: Optional[Mapping[tuple[int, int], bytes]] = None,
    ):
        if arity < 2:
            raise ValueError("arity must be at least 2")
        self.arity = arity
        self._levels = tuple(levels)
        self._overrides = dict(overrides or {})
        self.leaf_count = len(self._levels[0]) // D
        self._sizes = level_sizes(self.leaf_count, arity)

    @classmethod
    def from_leaf_digests(cls, leaves: bytes, m: int) -> "MerkleTree":
        if len(leaves) % D or not is_power_of_two(len(leaves) // D):
            raise NotPowerOfTwo(f"leaf count {len(leaves) // D} is not a power of two")
        return cls(m, _build_levels(bytes(leaves), m))

    @property
    def height(self) -> int:
        return len(self._sizes) - 1

    @property
    def root(self) -> bytes:
        return self.node(self.height, 0)

    def level_count(self, level: int) -> int:
        return self._sizes[level]

    def node(self, level: int, index: int) -> bytes:
        if not 0 <= index < self._sizes[level]:
            raise IndexOutOfRange(f"node ({level}, {index}) outside tree")
        hit = self._overrides.get((level, index))
        if hit is not None:
            return hit
        return self._levels[level][index * D : (index + 1) * D]

    def leaf(self, index: int) -> bytes:
        return self.node(0, index)

    def child_range(self, level: int, index: int) -> range:
        if level < 1:
            raise NotInnerNode("leaves have no children")
        start = index * self.arity
        return range(start, min(start + self.arity, self._sizes[level - 1]))

    def children(self, level: int, index: int) -> list[bytes]:
        return [self.node(level - 1, c) for c in self.child_range(level, index)]

    def leaf_digests(self, start: int = 0, count: Optional[int] = None) -> bytes:
        """Concatenated leaf digests of ``[start, start + count)``, overrides applied."""
        if count is None:
            count = self.leaf_count - start
        if start < 0 or start + count > self.leaf_count:
            raise IndexOutOfRange("leaf range outside tree")
        blob = self._levels[0][start * D : (start + count) * D]
        touched = [(i, d) for (t, i), d in self._overrides.items() if t == 0 and start <= i < start + count]
        if not touched:
            return blob
        buf = bytearray(blob)
        for i, d in touched:
            buf[(i - start) * D : (i - start + 1) * D] = d
        return bytes(buf)

    def materialized(self) -> "MerkleTree":
        if not self._overrides:
            return self
        levels = [bytearray(level) for level in self._levels]
        for (t, i), d in self._overrides.items():
            levels[t][i * D : (i + 1) * D] = d
        return MerkleTree(self.arity, [bytes(level) for level in levels])

    def with_leaf_digest(self, index: int, digest: bytes) -> "MerkleTree":
        """Copy of this tree with one leaf replaced; shares all untouched levels."""
        if not 0 <= index < self.leaf_count:
            raise IndexOutOfRange(f"leaf {index} outside tree of {self.leaf_count}")
        overrides = dict(self._overrides)
        overrides[(0, index)] = digest
        view = MerkleTree.__new__(MerkleTree)
        view.arity, view.leaf_count, view._levels, view._sizes = (
            self.arity,
            self.leaf_count,
            self._levels,
            self._sizes,
        )
        view._overrides = overrides
        idx = index
        for level in range(1, len(self._sizes)):
            idx //= self.arity
            overrides[(level, idx)] = inner_digest(view.children(level, idx))
        return view

    def prove(self, index: int) -> InclusionProof:
        if not 0 <= index < self.leaf_count:
            raise IndexOutOfRange(f"leaf {index} outside tree of {self.leaf_count}")
        path = []
        idx = index
        for level in range(self.height):
            parent = idx // self.arity
            group = self.child_range(level + 1, parent)
            pos = idx - group.start
            siblings = tuple(self.node(level, c) for c in group if c != idx)
            path.append((siblings, pos))
            idx = parent
        return InclusionProof(self.arity, index, tuple(path))

    def node_at_path(self, path: Iterable[int]) -> tuple[int, int]:
        """(level, index) of the node reached by following child indices from the root."""
        level, idx = self.height, 0
        for c in path:
            if level == 0:
                raise NotInnerNode("path continues below a leaf")
            group = self.child_range(level, idx)
            if not 0 <= c < len(group):
                raise NotInnerNode(f"child index {c} outside group of {len(group)}")
            idx = group.start + c
            level -= 1
        return level, idx


def make_merkle_tree(leaves: Sequence[bytes], m: int) -> MerkleTree:
    if not is_power_of_two(len(leaves)):
        raise NotPowerOfTwo(f"leaf count {len(leaves)} is not a power of two")
    return MerkleTree(m, _build_levels(b"".join(leaf_digest(v) for v in leaves), m))


def prove_inclusion(tree: MerkleTree, i: int) -> InclusionProof:
    return tree.prove(i)


def open_children(tree: MerkleTree, path: Sequence[int]) -> list[bytes]:
    level, idx = tree.node_at_path(path)
    if level == 0:
        raise NotInnerNode("path addresses a leaf")
    return tree.children(level, idx)


def verify_leaf_digest(
    proof: InclusionProof,
    root: bytes,
    i: int,
    digest: bytes,
    *,
    arity: Optional[int] = None,
    leaf_count: Optional[int] = None,
) -> bool:
    """Check an authentication path starting from an already-hashed leaf.

    With ``arity`` and ``leaf_count`` given, the path must also match the exact
    shape of that tree (height and ragged group sizes).
    """
    m = proof.arity
    if proof.leaf_index != i or i < 0 or m < 2 or (arity is not None and m != arity):
        return False
    sizes = None
    if leaf_count is not None:
        if i >= leaf_count:
            return False
        sizes = level_sizes(leaf_count, m)
        if len(proof.path) != len(sizes) - 1:
            return False
    idx, cur = i, digest
    for level, (siblings, pos) in enumerate(proof.path):
        n = len(siblings) + 1
        if pos != idx % m or n > m or pos >= n:
            return False
        if sizes is not None and n != min(m, sizes[level] - (idx - pos)):
            return False
        if any(len(s) != D for s in siblings):
            return False
        cur = inner_digest(siblings[:pos] + (cur,) + siblings[pos:])
        idx //= m
    return idx == 0 and cur == root


def verify_inclusion(
    proof: InclusionProof,
    root: bytes,
    i: int,
    value: bytes,
    *,
    arity: Optional[int] = None,
    leaf_count: Optional[int] = None,
) -> bool:
    return verify_leaf_digest(proof, root, i, leaf_digest(value), arity=arity, leaf_count=leaf_count)


@dataclass(frozen=True)
class Peaks:
    roots: tuple[bytes, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.roots) != len(self.sizes):
            raise ValueError("one root per size")

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return out

    def locate(self, index: int) -> tuple[int, int]:
        """(tree number, local index) of a global leaf index."""
        acc = 0
        for k, s in enumerate(self.sizes):
            if index < acc + s:
                return k, index - acc
            acc += s
        raise IndexOutOfRange(f"leaf {index} beyond {acc}")

    def well_shaped(self) -> bool:
        return bool(self.sizes) and list(self.sizes) == segment_lengths(self.total)

    def encode(self) -> bytes:
        return u64(len(self.roots)) + b"".join(u64(s) + r for s, r in zip(self.sizes, self.roots))

    @staticmethod
    def read(reader: Reader) -> "Peaks":
        n = reader.count(8 + D)
        pairs = [(reader.u64(), reader.digest()) for _ in range(n)]
        return Peaks(tuple(r for _, r in pairs), tuple(s for s, _ in pairs))

    @staticmethod
    def decode(data: bytes) -> "Peaks":
        return decode_whole(data, Peaks.read)

    def bag(self) -> bytes:
        """Single commitment over all peaks, for use outside the games."""
        return hash_tagged(Tag.PEAK_BAG, self.encode())


@encode.register(Peaks)
def _(value: Peaks) -> bytes:
    return value.encode()


class MountainRange:
    """Sequence of trees over the binary segments of the leaf count."""

    __slots__ = ("arity", "trees", "_offsets", "_range_cache")

    def __init__(self, arity: int, trees: Sequence[MerkleTree]):
        self.arity = arity
        self.trees = tuple(trees)
        self._offsets = []
        acc = 0
        for t in self.trees:
            self._offsets.append(acc)
            acc += t.leaf_count
        self._range_cache: dict[tuple[int, int], MerkleTree] = {}

    @classmethod
    def from_leaf_digests(cls, leaves: bytes, m: int) -> "MountainRange":
        total = len(leaves) // D
        trees, pos = [], 0
        for size in segment_lengths(total):
            trees.append(MerkleTree.from_leaf_digests(leaves[pos * D : (pos + size) * D], m))
            pos += size
        return cls(m, trees)

    @property
    def total_leaves(self) -> int:
        return self._offsets[-1] + self.trees[-1].leaf_count

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(t.leaf_count for t in self.trees)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(self._offsets)

    def peaks(self) -> Peaks:
        return Peaks(tuple(t.root for t in self.trees), self.sizes)

    def locate(self, index: int) -> tuple[int, int]:
        for k in range(len(self.trees) - 1, -1, -1):
            if index >= self._offsets[k]:
                local = index - self._offsets[k]
                if local >= self.trees[k].leaf_count:
                    break
                return k, local
        raise IndexOutOfRange(f"leaf {index} outside range of {self.total_leaves}")

    def leaf(self, index: int) -> bytes:
        k, local = self.locate(index)
        return self.trees[k].leaf(local)

    def prove(self, index: int) -> tuple[int, InclusionProof]:
        k, local = self.locate(index)
        return k, self.trees[k].prove(local)

    def with_leaf_digest(self, index: int, digest: bytes) -> "MountainRange":
        k, local = self.locate(index)
        trees = list(self.trees)
        trees[k] = trees[k].with_leaf_digest(local, digest)
        return MountainRange(self.arity, trees)

    def range_tree(self, start: int, size: int) -> MerkleTree:
        """Tree over the power-of-two leaf range ``[start, start + size)`` of one segment."""
        k, local = self.locate(start)
        tree = self.trees[k]
        if local + size > tree.leaf_count or not is_power_of_two(size):
            raise IndexOutOfRange("range must be a power of two inside one segment")
        if size == tree.leaf_count:
            return tree
        key = (start, size)
        cached = self._range_cache.get(key)
        if cached is None:
            cached = MerkleTree.from_leaf_digests(tree.leaf_digests(local, size), self.arity)
            self._range_cache[key] = cached
        return cached

    def range_root(self, start: int, size: int) -> bytes:
        k, local = self.locate(start)
        tree = self.trees[k]
        if local + size > tree.leaf_count or not is_power_of_two(size):
            raise IndexOutOfRange("range must be a power of two inside one segment")
        # Aligned ranges of m^t leaves are existing nodes.
        level, span = 0, 1
        while span < size:
            span *= self.arity
            level += 1
        if span == size and local % size == 0:
            return tree.node(level, local // size)
        return self.range_tree(start, size).root

    def append_leaf_digest(self, digest: bytes) -> "MountainRange":
        trees = list(self.trees)
        trees.append(MerkleTree(self.arity, [bytes(digest)]))
        while len(trees) >= 2 and trees[-1].leaf_count == trees[-2].leaf_count:
            right = trees.pop()
            left = trees.pop()
            trees.append(merge_trees(left, right))
        return MountainRange(self.arity, trees)


def merge_trees(left: MerkleTree, right: MerkleTree) -> MerkleTree:
    """Tree over the concatenated leaves of two equal-size trees.

    While the left tree's level t-1 splits into whole groups of m, level t of
    the merged tree is just both level-t strings side by side; only the levels
    above the first misaligned one are rehashed.
    """
    if left.leaf_count != right.leaf_count or left.arity != right.arity:
        raise ValueError("can only merge equal-size trees of the same arity")
    m = left.arity
    a, b = left.materialized()._levels, right.materialized()._levels
    levels = [a[0] + b[0]]
    aligned = True
    t = 1
    while len(levels[-1]) > D:
        if aligned and left.level_count(t - 1) % m == 0:
            levels.append(a[t] + b[t])
        else:
            aligned = False
            levels.append(_hash_level(levels[-1], m))
        t += 1
    return MerkleTree(m, levels)


def make_mmr(leaves: Sequence[bytes], m: int) -> MountainRange:
    if not leaves:
        raise InvalidLength("a mountain range needs at least one leaf")
    return MountainRange.from_leaf_digests(b"".join(leaf_digest(v) for v in leaves), m)


def mmr_append(mmr: MountainRange, leaf: bytes) -> MountainRange:
    return mmr.append_leaf_digest(leaf_digest(leaf))
