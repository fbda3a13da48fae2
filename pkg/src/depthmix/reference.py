"""Brute-force attention oracle.

Dense grouped-query sequence attention, dense mixed sequence+depth attention
(one softmax over concatenated logit blocks), and analytic gradients. This
module defines correctness for every kernel in the package; it is O(T^2 * L)
on purpose and makes no attempt to be fast. Masks are realized as -inf logits
before the softmax, never as post-hoc zeroing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttentionProbs:
    """Per-query probabilities over (visible sequence keys ++ own depth keys).

    probs has shape (B, H_q, T, T + L); columns [0, boundary) are sequence
    keys (exact zeros where masked), columns [boundary, boundary + L) are the
    query token's depth entries in write order.
    """

    probs: np.ndarray
    boundary: int


def _check_mixed_shapes(q, k, v, depth_k, depth_v):
    if q.ndim != 4 or k.ndim != 4 or v.ndim != 4:
        raise ValueError("q, k, v must have shape (B, H, T, d)")
    B, H_q, T, d = q.shape
    if k.shape != v.shape or k.shape[0] != B or k.shape[2:] != (T, d):
        raise ValueError("k/v shapes inconsistent with q")
    H_k = k.shape[1]
    if H_q % H_k:
        raise ValueError(f"H_q ({H_q}) must be a multiple of H_k ({H_k})")
    if depth_k.shape != depth_v.shape:
        raise ValueError("depth_k and depth_v shapes differ")
    if depth_k.ndim != 3 or depth_k.shape[0] != B or depth_k.shape[2] != H_k * d:
        raise ValueError("depth arrays must have shape (B, T*L, H_k*d)")
    if depth_k.shape[1] % T:
        raise ValueError(f"depth row count {depth_k.shape[1]} is not a multiple of T ({T})")
    return B, H_q, H_k, T, d, depth_k.shape[1] // T


def _softmax_rows(parts):
    """Jointly exponentiate per-row logit blocks against their shared max.

    Works in place (the blocks are owned by the caller) and returns the row
    normalizer separately so callers can divide once at the end.
    """
    m = parts[0].max(axis=1)
    for s in parts[1:]:
        np.maximum(m, s.max(axis=1), out=m)
    denom = np.zeros_like(m)
    for s in parts:
        s -= m[:, None]
        np.exp(s, out=s)
        denom += s.sum(axis=1)
    return parts, denom


def sequence_attention_ref(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                           causal: bool = True) -> np.ndarray:
    """Dense grouped-query attention, query head h served by kv head h // G."""
    empty_dk = np.zeros((q.shape[0], 0, k.shape[1] * q.shape[3]), dtype=q.dtype)
    out, _ = mixed_attention_ref(q, k, v, empty_dk, empty_dk, causal=causal)
    return out


def mixed_attention_ref(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                        depth_k: np.ndarray, depth_v: np.ndarray,
                        causal: bool = True,
                        need_probs: bool = True) -> tuple[np.ndarray, AttentionProbs | None]:
    """Oracle forward: softmax over [visible sequence logits || own depth logits].

    depth_k/depth_v hold L entries per token in write order, flattened to
    (B, T*L, H_k*d). Both logit blocks use the same 1/sqrt(d) scaling. L == 0
    degenerates to plain sequence attention, bit for bit.
    """
    B, H_q, H_k, T, d, L = _check_mixed_shapes(q, k, v, depth_k, depth_v)
    dt = q.dtype
    neg = dt.type(-np.inf)
    q_scaled = q * dt.type(1.0 / np.sqrt(d))

    tok = np.arange(T)
    seq_hidden = tok[:, None] < tok[None, :] if causal else None
    if L:
        dep_hidden = tok[:, None] != np.arange(T * L)[None, :] // L
        dk_h = depth_k.reshape(B, T * L, H_k, d)
        dv_h = depth_v.reshape(B, T * L, H_k, d)

    out = np.empty_like(q)
    probs = np.empty((B, H_q, T, T + L), dtype=dt) if need_probs else None
    rows = np.arange(T)
    for b in range(B):
        for h in range(H_q):
            j = h * H_k // H_q
            s_seq = q_scaled[b, h] @ k[b, j].T
            if causal:
                np.copyto(s_seq, neg, where=seq_hidden)
            parts = [s_seq]
            if L:
                s_dep = q_scaled[b, h] @ dk_h[b, :, j].T
                np.copyto(s_dep, neg, where=dep_hidden)
                parts.append(s_dep)
            ps, denom = _softmax_rows(parts)
            o = ps[0] @ v[b, j]
            if L:
                o += ps[1] @ dv_h[b, :, j]
            out[b, h] = o / denom[:, None]
            if need_probs:
                probs[b, h, :, :T] = ps[0] / denom[:, None]
                if L:
                    own = ps[1].reshape(T, T, L)[rows, rows]
                    probs[b, h, :, T:] = own / denom[:, None]
    return out, (AttentionProbs(probs=probs, boundary=T) if need_probs else None)


def mixed_attention_backward_ref(q, k, v, depth_k, depth_v, d_out,
                                 causal: bool = True):
    """Analytic gradients of sum(out * d_out) through the mixed softmax.

    Per row, with probabilities p and value-side contributions u = dP,
    dS = p * (u - p.u), mapped back through q, k/depth_k, v/depth_v.
    """
    B, H_q, H_k, T, d, L = _check_mixed_shapes(q, k, v, depth_k, depth_v)
    if d_out.shape != q.shape:
        raise ValueError("d_out shape must match q")
    dt = q.dtype
    scale = dt.type(1.0 / np.sqrt(d))
    neg = dt.type(-np.inf)

    tok = np.arange(T)
    m_seq = np.where(tok[:, None] >= tok[None, :], dt.type(0.0), neg) if causal \
        else np.zeros((T, T), dtype=dt)
    if L:
        m_dep = np.where(tok[:, None] == np.arange(T * L)[None, :] // L, dt.type(0.0), neg)
        dk_h = depth_k.reshape(B, T * L, H_k, d)
        dv_h = depth_v.reshape(B, T * L, H_k, d)

    dq = np.zeros_like(q)
    dk = np.zeros_like(k)
    dv = np.zeros_like(v)
    ddk = np.zeros((B, T * L, H_k, d), dtype=dt)
    ddv = np.zeros((B, T * L, H_k, d), dtype=dt)
    for b in range(B):
        for h in range(H_q):
            j = h * H_k // H_q
            parts = [q[b, h] @ k[b, j].T * scale + m_seq]
            if L:
                parts.append(q[b, h] @ dk_h[b, :, j].T * scale + m_dep)
            ps, denom = _softmax_rows(parts)
            p_seq = ps[0] / denom[:, None]
            dp_seq = d_out[b, h] @ v[b, j].T
            rowdot = (p_seq * dp_seq).sum(axis=1)
            if L:
                p_dep = ps[1] / denom[:, None]
                dp_dep = d_out[b, h] @ dv_h[b, :, j].T
                rowdot += (p_dep * dp_dep).sum(axis=1)
            ds_seq = p_seq * (dp_seq - rowdot[:, None])
            dq[b, h] = ds_seq @ k[b, j] * scale
            dk[b, j] += ds_seq.T @ q[b, h] * scale
            dv[b, j] += p_seq.T @ d_out[b, h]
            if L:
                ds_dep = p_dep * (dp_dep - rowdot[:, None])
                dq[b, h] += ds_dep @ dk_h[b, :, j] * scale
                ddk[b, :, j] += ds_dep.T @ q[b, h] * scale
                ddv[b, :, j] += p_dep.T @ d_out[b, h]
    return dq, dk, dv, ddk.reshape(B, T * L, H_k * d), ddv.reshape(B, T * L, H_k * d)


def finite_diff_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g
