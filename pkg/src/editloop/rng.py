"""Counter-based deterministic random generator (splitmix64).

Python's `random` and numpy's generators are stable in practice but their
stream contracts are not ours to pin; benchmark artifacts must be bit-equal
across platforms and library versions, so the generator is spelled out here:

    state_n = (seed + n * 0x9E3779B97F4A7C15) mod 2^64
    out_n   = mix(state_n)        # splitmix64 finalizer

Every derived quantity (ints, floats, choices, shuffles) is defined purely
in terms of the out_n stream with integer arithmetic.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def fnv1a64(data: str | bytes) -> int:
    """FNV-1a 64-bit hash; platform-independent stand-in for hash()."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = 0xCBF29CE484222325
    for byte in data:
        h = (h ^ byte) * 0x100000001B3 & _MASK64
    return h


def derive_seed(seed: int, *labels) -> int:
    """Mix string/int labels into a seed (the substream rule used by fork)."""
    out = seed & _MASK64
    for label in labels:
        if isinstance(label, int):
            out = _mix(out ^ (label & _MASK64))
        else:
            out = _mix(out ^ fnv1a64(str(label)))
    return out


def u64_stream(seed: int, count: int):
    """Vectorized splitmix64 outputs for counters 1..count (numpy uint64).

    out[i] = mix(seed + (i+1) * GOLDEN), identical to a scalar DetRng(seed)
    drawing count times; unsigned numpy arithmetic wraps mod 2^64 silently.
    """
    import numpy as np
    idx = np.arange(1, count + 1, dtype=np.uint64)
    state = (np.uint64(seed & _MASK64) + idx * np.uint64(_GOLDEN))
    z = (state ^ (state >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class DetRng:
    """Seedable splitmix64 stream with the derived draws used in this package."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def fork(self, *labels) -> "DetRng":
        """Independent substream keyed by string/int labels (order-sensitive)."""
        return DetRng(derive_seed(self._state, *labels))

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def random(self) -> float:
        """Float in [0, 1) with 53 bits of the stream."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.next_u64() % len(seq)]

    def weighted_choice(self, items, weights):
        """Choice by integer weights (floats would reintroduce platform drift)."""
        total = sum(weights)
        if total <= 0:
            raise ValueError("weights must sum to a positive integer")
        pick = self.next_u64() % total
        acc = 0
        for item, w in zip(items, weights):
            acc += w
            if pick < acc:
                return item
        return items[-1]

    def sample(self, seq, k: int) -> list:
        """k distinct elements, order defined by the stream (Fisher-Yates prefix)."""
        if k > len(seq):
            raise ValueError("sample larger than population")
        pool = list(seq)
        out = []
        for i in range(k):
            j = self.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out

    def shuffle(self, seq: list) -> None:
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(0, i)
            seq[i], seq[j] = seq[j], seq[i]
