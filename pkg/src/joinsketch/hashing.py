"""Seeded k-wise independent hash families for sketching.

Sign functions are degree-3 polynomials over the Mersenne prime field
(4-wise independent, output in {-1, +1} via the parity bit); bin
functions are degree-1 polynomials (2-wise independent, output in
[0, m)).  One sign function is shared by both endpoints of a join edge
and one bin function is shared by all attributes of a join-graph
component, so equal values land in equal bins across relations.

All coefficients derive deterministically from the master seed, keyed by
(kind, identity, repetition); two engines given the same seed and query
produce bit-identical hash sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import QueryError
from .mersenne import (
    derive_state,
    field_elements,
    mod_p,
    poly_eval,
    poly_eval_vec,
)

if TYPE_CHECKING:  # pragma: no cover
    from .joingraph import JoinGraph
    from .sketch import SketchConfig

KIND_SIGN = 1
KIND_BIN = 2


@dataclass(frozen=True)
class SignHash:
    """Degree-3 polynomial hash mapping items to {-1, +1}."""

    coefficients: tuple[int, int, int, int]
    edge: tuple[int, int]
    repetition: int


@dataclass(frozen=True)
class BinHash:
    """Degree-1 polynomial hash mapping items to [0, m)."""

    coefficients: tuple[int, int]
    component: int
    repetition: int
    m: int


@dataclass(frozen=True)
class HashSet:
    """All hash functions for one (query, config) pair.

    Holds one SignHash per (join edge, repetition) and one BinHash per
    (graph component, repetition).
    """

    signs: dict[tuple[int, int, int], SignHash]
    bins: dict[tuple[int, int], BinHash]

    def sign_for(self, u: int, v: int, rep: int) -> SignHash:
        lo, hi = (u, v) if u < v else (v, u)
        return self.signs[(lo, hi, rep)]

    def bin_for(self, component: int, rep: int) -> BinHash:
        return self.bins[(component, rep)]


def derive_hash_set(config: "SketchConfig", graph: "JoinGraph") -> HashSet:
    """Derive the full hash set for a query from the master seed.

    Coefficients come from counter-mode expansion of the seed keyed on
    (kind, edge or component id, repetition), so the result is a pure
    function of (seed, graph, m, l).
    """
    if not graph.edges:
        raise QueryError("query has no join edges")
    if graph.n_components < 1:
        raise QueryError("query has no join-graph components")

    signs: dict[tuple[int, int, int], SignHash] = {}
    bins: dict[tuple[int, int], BinHash] = {}
    for rep in range(config.l):
        for u, v in graph.edges:
            state = derive_state(config.seed, KIND_SIGN, u, v, rep)
            coeffs = field_elements(state, 4)
            signs[(u, v, rep)] = SignHash(coeffs, (u, v), rep)
        for comp in range(graph.n_components):
            state = derive_state(config.seed, KIND_BIN, comp, 0, rep)
            coeffs = field_elements(state, 2)
            bins[(comp, rep)] = BinHash(coeffs, comp, rep, config.m)
    return HashSet(signs=signs, bins=bins)


_MASK64 = (1 << 64) - 1


def sign_eval(h: SignHash, x: int) -> int:
    """Evaluate a sign hash at a 64-bit item; returns -1 or +1."""
    return 1 - 2 * (poly_eval(h.coefficients, mod_p(x & _MASK64)) & 1)


def bin_eval(h: BinHash, x: int) -> int:
    """Evaluate a bin hash at a 64-bit item; returns an index in [0, m)."""
    return poly_eval(h.coefficients, mod_p(x & _MASK64)) % h.m


def sign_eval_vec(h: SignHash, xs: np.ndarray) -> np.ndarray:
    """Vectorized sign_eval; returns float64 values in {-1.0, +1.0}."""
    parity = poly_eval_vec(h.coefficients, xs) & np.uint64(1)
    return 1.0 - 2.0 * parity.astype(np.float64)


def bin_eval_vec(h: BinHash, xs: np.ndarray) -> np.ndarray:
    """Vectorized bin_eval; returns uint64 indices in [0, m)."""
    return poly_eval_vec(h.coefficients, xs) % np.uint64(h.m)
