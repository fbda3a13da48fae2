"""Index mathematics for grouped sequence/depth attention.

Covers the base-time mapping for interleaved query rows, the grouped causal
and depth-match masks, the T_q = G*T_kv query interleaving, chunked packing of
the flattened depth cache, and depth-utilization accounting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

import numpy as np

from .core import dtype_for


class DepthLayout(str, enum.Enum):
    """Depth-KV access strategies of the fused kernel, ordered by efficiency."""

    FLASH_COMPATIBLE = "flash_compatible"
    CHUNK_AWARE = "chunk_aware"
    GROUP_AWARE = "group_aware"


@dataclass(frozen=True)
class AttentionConfig:
    """Shape and layout hyperparameters shared by all kernels.

    T: sequence length (tokens); D: model width; G: query-group size;
    H_q/H_k: query/key-value head counts; d: head dimension; L: depth
    entries per token for the current call; C: query-chunk size; B: batch.
    """

    T: int
    D: int
    G: int
    H_q: int
    H_k: int
    d: int
    L: int
    C: int
    B: int = 1
    q_block: int = 64
    kv_block: int = 64
    precision: str = "double"

    def __post_init__(self):
        for name in ("T", "D", "G", "H_q", "H_k", "d", "C", "B", "q_block", "kv_block"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.L < 0:
            raise ValueError("L must be >= 0")
        if self.H_q != self.G * self.H_k:
            raise ValueError(f"H_q ({self.H_q}) must equal G*H_k ({self.G * self.H_k})")
        if self.D != self.H_q * self.d:
            raise ValueError(f"D ({self.D}) must equal H_q*d ({self.H_q * self.d})")
        if self.q_block % self.G:
            raise ValueError("q_block must be a multiple of G (query blocks align with groups)")
        if self.C % self.G:
            raise ValueError("C must be a multiple of G")
        if self.T % self.C:
            raise ValueError("T must be a multiple of C (pad-free chunking)")
        dtype_for(self.precision)

    @property
    def dtype(self) -> np.dtype:
        return dtype_for(self.precision)

    @property
    def rows(self) -> int:
        """Interleaved query rows per (batch, kv-head) slice."""
        return self.G * self.T


@dataclass(frozen=True)
class LayoutIndex:
    """One (query row, sequence key, depth column) coordinate with its base time."""

    i_q: int
    i_k: int
    j_d: int
    t_base: int

    @classmethod
    def at(cls, i_q: int, i_k: int, j_d: int, G: int) -> "LayoutIndex":
        return cls(i_q=i_q, i_k=i_k, j_d=j_d, t_base=base_time(i_q, G))


def base_time(i_q, G: int):
    """Token position of interleaved query row i_q: floor(i_q / G)."""
    return i_q // G


def grouped_causal_visible(i_q, i_k, G: int):
    """Sequence visibility for interleaved rows: floor(i_q/G) >= i_k.

    Reduces to the plain causal mask when G == 1. Works elementwise on arrays.
    """
    return base_time(i_q, G) >= i_k


def depth_match(i_q, j_d, G: int, L: int):
    """Depth visibility: flattened column j_d belongs to row i_q's own token,
    i.e. floor(i_q/G) == floor(j_d/L). Works elementwise on arrays."""
    if L < 1:
        raise ValueError("L must be >= 1 for depth matching")
    return base_time(i_q, G) == j_d // L


def interleave_queries(q: np.ndarray, G: int) -> np.ndarray:
    """(B, H_q, T, d) -> (B, H_k, G*T, d) with row t*G + g holding the query
    of head j*G + g at token t for kv-head j. The group axis varies fastest so
    floor(row/G) recovers the token position."""
    if q.ndim != 4:
        raise ValueError("q must have shape (B, H_q, T, d)")
    B, H_q, T, d = q.shape
    if H_q % G:
        raise ValueError("H_q must be a multiple of G")
    H_k = H_q // G
    return np.ascontiguousarray(
        q.reshape(B, H_k, G, T, d).transpose(0, 1, 3, 2, 4).reshape(B, H_k, G * T, d)
    )


def deinterleave_queries(q_rows: np.ndarray, G: int) -> np.ndarray:
    """Inverse of interleave_queries: (B, H_k, G*T, d) -> (B, H_q, T, d)."""
    if q_rows.ndim != 4:
        raise ValueError("q_rows must have shape (B, H_k, G*T, d)")
    B, H_k, rows, d = q_rows.shape
    if rows % G:
        raise ValueError("row count must be a multiple of G")
    T = rows // G
    return np.ascontiguousarray(
        q_rows.reshape(B, H_k, T, G, d).transpose(0, 1, 3, 2, 4).reshape(B, H_k * G, T, d)
    )


def pack_depth_chunk(cache_k: np.ndarray, cache_v: np.ndarray, chunk_index: int,
                     C: int, G: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Depth rows needed by interleaved query chunk [chunk_index*C, (chunk+1)*C).

    The chunk covers base times [chunk_index*C/G, (chunk_index+1)*C/G), so the
    packed block is the (C/G)*L flattened rows [t_start*L, t_end*L). Returns
    fresh copies, never views.
    """
    if C % G:
        raise ValueError("C must be a multiple of G")
    if cache_k.shape != cache_v.shape:
        raise ValueError("cache_k and cache_v shapes differ")
    t_start = chunk_index * (C // G)
    t_end = (chunk_index + 1) * (C // G)
    if chunk_index < 0 or L < 1 or t_end * L > cache_k.shape[0]:
        raise ValueError(
            f"chunk {chunk_index} out of range for cache with {cache_k.shape[0]} rows"
        )
    return cache_k[t_start * L:t_end * L].copy(), cache_v[t_start * L:t_end * L].copy()


def depth_utilization(layout: DepthLayout | str, T: int, C: int, G: int) -> float:
    """Fraction of a densely computed depth-score region that is unmasked:
    1/T (flash_compatible), 1/C (chunk_aware), G/C (group_aware)."""
    return float(depth_utilization_fraction(layout, T, C, G))


def depth_utilization_fraction(layout: DepthLayout | str, T: int, C: int, G: int) -> Fraction:
    if min(T, C, G) < 1:
        raise ValueError("T, C, G must be >= 1")
    if C % G:
        raise ValueError("C must be a multiple of G")
    layout = DepthLayout(layout)
    if layout is DepthLayout.FLASH_COMPATIBLE:
        return Fraction(1, T)
    if layout is DepthLayout.CHUNK_AWARE:
        return Fraction(1, C)
    return Fraction(G, C)


def utilization_percent(layout: DepthLayout | str, T: int, C: int, G: int) -> str:
    """Utilization as a percent string, two decimals, round half to even
    (0.03125 prints \"3.12%\")."""
    frac = depth_utilization_fraction(layout, T, C, G) * 100
    dec = Decimal(frac.numerator) / Decimal(frac.denominator)
    return f"{dec.quantize(Decimal('0.01'), rounding=ROUND_HALF_EVEN)}%"
