"""Deterministic, platform-independent random streams.

Every source of randomness in this package is a *named stream*: a counter-based
Philox (4x64) bit generator keyed by a 64-bit seed plus a path of labels such
as ``("aug", epoch, sample_index)``.  Streams are identified by value, never by
shared mutable state, so the same (seed, path) always reproduces the same
sequence on any platform and regardless of batching, threading, or evaluation
order.

The 128-bit Philox key is a splitmix64 hash of the seed and path.  The
splitmix64 update is

    x <- (x + 0x9E3779B97F4A7C15) mod 2^64
    z <- x;  z <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z <- (z xor (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output <- z xor (z >> 31)

and path components are folded prefix-free (ints and strings are tagged, and
strings are terminated), so distinct paths cannot collide by concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1
_INT_TAG = 0x11
_STR_TAG = 0x22
_STR_END = 0x33

ALGORITHM = "philox4x64"


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix(h: int, value: int) -> int:
    return _splitmix64(h ^ _splitmix64(value & _MASK64))


def _fold(h: int, component: int | str) -> int:
    if isinstance(component, str):
        h = _mix(h, _STR_TAG)
        for byte in component.encode("utf-8"):
            h = _mix(h, byte)
        return _mix(h, _STR_END)
    h = _mix(h, _INT_TAG)
    return _mix(h, int(component))


def _digest(seed: int, path: tuple[int | str, ...], base: int | None = None) -> int:
    h = _splitmix64(int(seed) & _MASK64) if base is None else base
    for component in path:
        h = _fold(h, component)
    return h


@dataclass(frozen=True)
class RngState:
    """Value-identity of a random stream: algorithm, seed, path, position.

    ``position`` counts 64-bit outputs already consumed; ``generator()``
    returns a fresh generator advanced to that point.
    """

    seed: int
    path: tuple[int | str, ...] = ()
    algorithm: str = ALGORITHM
    position: int = 0
    digest: int = field(default=-1, repr=False, compare=False)

    def __post_init__(self):
        if self.algorithm != ALGORITHM:
            raise ValueError(f"unknown rng algorithm: {self.algorithm!r}")
        if self.digest < 0:
            object.__setattr__(self, "digest", _digest(self.seed, self.path))

    def child(self, *labels: int | str) -> "RngState":
        """Derive an independent named substream."""
        return RngState(
            self.seed,
            self.path + labels,
            self.algorithm,
            0,
            digest=_digest(self.seed, labels, base=self.digest),
        )

    def key128(self) -> tuple[int, int]:
        return _splitmix64(self.digest ^ 0x1), _splitmix64(self.digest ^ 0x2)

    def generator(self) -> np.random.Generator:
        lo, hi = self.key128()
        bitgen = np.random.Philox(0)
        state = bitgen.state
        state["state"]["key"][0] = lo
        state["state"]["key"][1] = hi
        state["state"]["counter"][:] = 0
        bitgen.state = state
        _skip(bitgen, self.position)
        return np.random.Generator(bitgen)


def _skip(bitgen: np.random.Philox, position: int) -> None:
    """Discard ``position`` 64-bit outputs (Philox.advance moves 4 at a time)."""
    if not position:
        return
    blocks, rem = divmod(position, 4)
    if blocks:
        bitgen.advance(blocks)
    if rem:
        bitgen.random_raw(rem)


class StreamFactory:
    """Reusable generator for hot loops: re-keys one Philox in place.

    ``get`` returns the same Generator object re-keyed to the requested
    stream, producing exactly the sequence ``state.generator()`` would.
    Use strictly sequentially on one thread; a previously returned handle is
    invalidated by the next ``get``.
    """

    def __init__(self):
        self._bitgen = np.random.Philox(0)
        self._gen = np.random.Generator(self._bitgen)
        self._template = self._bitgen.state

    def get(self, state: RngState) -> np.random.Generator:
        lo, hi = state.key128()
        template = self._template
        template["state"]["key"][0] = lo
        template["state"]["key"][1] = hi
        template["state"]["counter"][:] = 0
        template["buffer_pos"] = 4
        template["has_uint32"] = 0
        template["uinteger"] = 0
        self._bitgen.state = template
        _skip(self._bitgen, state.position)
        return self._gen


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Shorthand for ``RngState(seed, path).generator()``."""
    return RngState(seed, tuple(path)).generator()
