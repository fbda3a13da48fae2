"""Array substrate: precision handling, deterministic RNG, stable exp2 helpers.

Everything downstream works on plain numpy arrays in row-major layout with the
head axis outermost after batch. Double precision is the verification default;
single precision is an opt-in mode for benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG2E = float(np.log2(np.e))

PRECISIONS = {"double": np.float64, "single": np.float32}

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def dtype_for(precision: str) -> np.dtype:
    try:
        return np.dtype(PRECISIONS[precision])
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}; expected one of {sorted(PRECISIONS)}")


def ensure_finite(name: str, arr: np.ndarray) -> None:
    """Raise on NaN/Inf input; kernels assume finite operands."""
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class Prng:
    """splitmix64 state; a value type, advanced functionally."""

    state: int = 0


def prng_next_u64(p: Prng) -> tuple[int, Prng]:
    """Advance splitmix64 by one step and return (output, new state)."""
    state = (p.state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z, Prng(state)


def splitmix64_stream(seed: int, n: int) -> np.ndarray:
    """First n splitmix64 outputs for the given seed, vectorized.

    splitmix64 is counter-based: the state after k steps is
    seed + k * golden (mod 2^64), so the whole stream mixes in one shot.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    with np.errstate(over="ignore"):
        state = (np.uint64(seed & _MASK64)
                 + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN))
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def gaussian_fill(shape, seed: int, std: float = 1.0, dtype=np.float64) -> np.ndarray:
    """I.i.d. N(0, std^2) samples via Box-Muller over the splitmix64 stream.

    Bit-identical for a fixed seed on every platform.
    """
    if std <= 0:
        raise ValueError("std must be > 0")
    shape = tuple(int(s) for s in (shape if np.iterable(shape) else (shape,)))
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if n == 0:
        return np.empty(shape, dtype=dtype)
    m = (n + 1) // 2
    bits = splitmix64_stream(seed, 2 * m)
    # 53-bit uniforms; u1 in (0, 1] so log never sees 0
    u1 = ((bits[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (bits[m:] >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return (std * z).reshape(shape).astype(dtype, copy=False)


def exp2_sum_stable(logits: np.ndarray, max_hint: float = -np.inf) -> tuple[float, float]:
    """Return (sum 2^(x - m), m) with m = max(max_hint, max logits).

    Empty input returns (0.0, max_hint). Safe for logits up to ~1e4 in
    magnitude: the shift keeps every exponent <= 0.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        return 0.0, float(max_hint)
    m = max(float(max_hint), float(logits.max()))
    if np.isneginf(m):
        return 0.0, m
    return float(np.exp2(logits - m).sum()), m
