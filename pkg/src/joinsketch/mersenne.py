"""Arithmetic over the Mersenne prime field p = 2^61 - 1 and seed expansion.

Scalar helpers work on plain Python ints, which are exact at any width.
The ``*_vec`` variants operate on uint64 numpy arrays; products of two
61-bit residues do not fit in 64 bits, so multiplication splits each
operand into 31-bit limbs and reduces with shifts (2^61 = 1 mod p),
keeping every intermediate below 2^64.

Seed expansion uses the splitmix64 finalizer in counter mode.  A stream
state is derived by absorbing identifying words (kind, ids, repetition)
into the master seed; field elements are then drawn by rejection on the
low 61 bits (only the single value p itself is ever rejected).
"""

from __future__ import annotations

import numpy as np

PRIME = (1 << 61) - 1

_MASK64 = (1 << 64) - 1
_MASK31 = (1 << 31) - 1
_MASK30 = (1 << 30) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def mod_p(x: int) -> int:
    """Reduce a non-negative Python int into [0, p)."""
    return x % PRIME


def poly_eval(coefficients: tuple[int, ...], x: int) -> int:
    """Evaluate a polynomial over the field at x, highest degree first."""
    acc = 0
    for c in coefficients:
        acc = (acc * x + c) % PRIME
    return acc


def mix64(z: int) -> int:
    """splitmix64 finalizer for a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def derive_state(master_seed: int, *words: int) -> int:
    """Absorb identifying words into a 64-bit stream state.

    The mapping is fixed so that sketches are reproducible across
    machines: callers always pass the same arity of words for a given
    kind of hash function.
    """
    state = mix64((master_seed & _MASK64) ^ _GOLDEN)
    for w in words:
        state = mix64(state ^ (w & _MASK64))
    return state


def field_elements(state: int, count: int) -> tuple[int, ...]:
    """Draw uniform elements of [0, p) from a stream state (counter mode)."""
    out: list[int] = []
    t = 0
    while len(out) < count:
        t += 1
        v = mix64((state + t * _GOLDEN) & _MASK64) & PRIME
        if v != PRIME:
            out.append(v)
    return tuple(out)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


def field_elements_vec(state: int, count: int) -> np.ndarray:
    """Vectorized counter-mode draw of `count` elements of [0, p)."""
    counters = np.arange(1, count + 1, dtype=np.uint64)
    values = _mix64_vec(np.uint64(state) + counters * np.uint64(_GOLDEN))
    values &= np.uint64(PRIME)
    offset = np.uint64(count)
    bad = values == PRIME
    while bad.any():
        values[bad] = _mix64_vec(
            np.uint64(state) + (counters[bad] + offset) * np.uint64(_GOLDEN)
        ) & np.uint64(PRIME)
        offset += np.uint64(count)
        bad = values == PRIME
    return values


def mod_p_vec(x: np.ndarray) -> np.ndarray:
    """Reduce a uint64 array into [0, p)."""
    r = (x >> np.uint64(61)) + (x & np.uint64(PRIME))
    # r <= p + 7, one conditional subtract suffices
    return np.where(r >= PRIME, r - np.uint64(PRIME), r)


def mulmod_vec(a: np.ndarray | np.uint64, b: np.ndarray | np.uint64) -> np.ndarray:
    """Multiply residues (< 2^61) mod p without leaving uint64.

    a*b = (a1*b1)*2^62 + (a1*b0 + a0*b1)*2^31 + a0*b0 with 31-bit limbs;
    2^62 = 2 and 2^61 = 1 mod p collapse the high parts.
    """
    a1 = a >> np.uint64(31)
    a0 = a & np.uint64(_MASK31)
    b1 = b >> np.uint64(31)
    b0 = b & np.uint64(_MASK31)

    hi = a1 * b1  # < 2^60
    mid = a1 * b0 + a0 * b1  # < 2^62
    lo = a0 * b0  # < 2^62

    mid = (mid >> np.uint64(61)) + (mid & np.uint64(PRIME))  # <= 2^61
    mid_term = (mid >> np.uint64(30)) + ((mid & np.uint64(_MASK30)) << np.uint64(31))
    lo_term = (lo >> np.uint64(61)) + (lo & np.uint64(PRIME))

    t = (hi << np.uint64(1)) + mid_term + lo_term  # < 2^63
    t = (t >> np.uint64(61)) + (t & np.uint64(PRIME))  # <= p + 3
    return np.where(t >= PRIME, t - np.uint64(PRIME), t)


def poly_eval_vec(coefficients, x: np.ndarray) -> np.ndarray:
    """Evaluate a polynomial at each element of a uint64 array.

    `coefficients` is either a tuple of ints (one polynomial) or a
    sequence of uint64 arrays broadcastable against x (one polynomial
    per output element, used by the dense AMS sign families).
    """
    x = mod_p_vec(np.asarray(x, dtype=np.uint64))
    first = coefficients[0]
    if isinstance(first, (int, np.integer)):
        acc = np.broadcast_to(np.uint64(first), x.shape).copy()
    else:
        acc = np.broadcast_arrays(first, x)[0].copy()
    for c in coefficients[1:]:
        acc = mulmod_vec(acc, x) + np.asarray(c, dtype=np.uint64)
        acc = (acc >> np.uint64(61)) + (acc & np.uint64(PRIME))
        acc = np.where(acc >= PRIME, acc - np.uint64(PRIME), acc)
    return acc
