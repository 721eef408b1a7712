"""Neural layer primitives with explicit reverse-mode backward passes.

All layers are plain functions over numpy arrays. Forward passes return
``(out, cache)``; the matching backward pass consumes the cache and the
upstream gradient and returns input and parameter gradients.

Throughput notes, relevant at training batch sizes:
  - products against a weight matrix are flattened to one large GEMM
    (numpy will not collapse a stacked operand on its own);
  - the LSTM core is time-major with preallocated per-step blocks and
    in-place gate math, so the step loop allocates nothing and carries
    only the recurrent GEMM;
  - tune_allocator() stops glibc from returning the large activation
    buffers to the kernel between batches, which otherwise costs more in
    page faults than the arithmetic itself.
"""

from __future__ import annotations

import numpy as np

_ALLOCATOR_TUNED = False


def tune_allocator() -> None:
    """Keep freed large blocks on the heap (M_MMAP_MAX=0, no trim).

    Activation buffers here run tens of MB and are reallocated every
    batch; with glibc defaults each round trips through mmap/munmap and
    the resulting page faults dominate the runtime. Safe to call multiple
    times; silently does nothing off glibc."""
    global _ALLOCATOR_TUNED
    if _ALLOCATOR_TUNED:
        return
    _ALLOCATOR_TUNED = True
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-4, 0)  # M_MMAP_MAX
        libc.mallopt(-1, 2**31 - 1)  # M_TRIM_THRESHOLD
    except (OSError, AttributeError):
        pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    # 0.5 * (1 + tanh(x/2)): identical function, saturates cleanly, and
    # numpy's tanh is SIMD-vectorized where exp is not
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sigmoid_inplace(x: np.ndarray) -> None:
    x *= 0.5
    np.tanh(x, out=x)
    x += 1.0
    x *= 0.5


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def normalize_adjacency(adjacency: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Symmetric degree normalization with self-loops,
    D^-1/2 (A + I) D^-1/2. Isolated nodes reduce to a unit self-loop."""
    a = np.asarray(adjacency, dtype=dtype)
    n = a.shape[-1]
    a_tilde = a + np.eye(n, dtype=dtype)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=-1))
    return a_tilde * inv_sqrt[..., :, None] * inv_sqrt[..., None, :]


def _flat2(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1])


def _matmul2d(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """x (..., I) @ w (I, O) as one GEMM."""
    if x.ndim == 2:
        return x @ w
    return (_flat2(x) @ w).reshape(*x.shape[:-1], w.shape[1])


# ---------------------------------------------------------------------------
# graph convolution: relu(A_norm @ X @ W + b)

def gcn_forward(x, a_norm, w, b):
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"feature dim {x.shape[-1]} does not match W {w.shape}")
    if a_norm.shape[-1] != x.shape[-2]:
        raise ValueError(f"A_norm {a_norm.shape} does not match X {x.shape}")
    ax = a_norm @ x
    z = _matmul2d(ax, w)
    z += b
    pos = z > 0
    np.maximum(z, 0.0, out=z)
    return z, (ax, a_norm, w, pos)


def gcn_backward(cache, d_out):
    ax, a_norm, w, pos = cache
    dz = d_out * pos
    dz_flat = _flat2(dz)
    d_b = dz_flat.sum(axis=0)
    d_w = _flat2(ax).T @ dz_flat
    d_x = a_norm.swapaxes(-1, -2) @ _matmul2d(dz, w.T)
    return d_x, d_w, d_b


# ---------------------------------------------------------------------------
# gated global pooling: sum_v sigmoid(H_v Wg + bg) * (H_v Wp + bp)

def gated_pool_forward(h, w_gate, b_gate, w_proj, b_proj):
    if h.shape[-1] != w_gate.shape[0]:
        raise ValueError(f"channel dim {h.shape[-1]} does not match gate {w_gate.shape}")
    gate = _matmul2d(h, w_gate)
    gate += b_gate
    _sigmoid_inplace(gate)
    proj = _matmul2d(h, w_proj)
    proj += b_proj
    out = (gate * proj).sum(axis=-2)
    return out, (h, gate, proj, w_gate, w_proj)


def gated_pool_backward(cache, d_out):
    h, gate, proj, w_gate, w_proj = cache
    do = np.expand_dims(d_out, -2)
    d_gate = do * proj
    d_proj = do * gate
    # d_glin = d_gate * gate * (1 - gate), built in place
    d_glin = d_gate
    d_glin *= gate
    np.subtract(1.0, gate, out=gate)  # gate buffer is dead after this
    d_glin *= gate
    d_h = _matmul2d(d_glin, w_gate.T)
    d_h += _matmul2d(d_proj, w_proj.T)
    h2 = _flat2(h)
    d_w_gate = h2.T @ _flat2(d_glin)
    d_b_gate = _flat2(d_glin).sum(axis=0)
    d_w_proj = h2.T @ _flat2(d_proj)
    d_b_proj = _flat2(d_proj).sum(axis=0)
    return d_h, d_w_gate, d_b_gate, d_w_proj, d_b_proj


# ---------------------------------------------------------------------------
# LSTM. Time-major core (k, B, .): zero initial state, fused gate layout
# i, f, g, o. After the forward pass the preactivation block holds the
# activated gate values, which is exactly what the backward pass needs.

def lstm_seq_forward(x_tm, w, u, b):
    """x_tm: (k, B, I) time-major input sequence. Returns (h_all, cache)
    with h_all of shape (k, B, H)."""
    k, batch, dim_in = x_tm.shape
    hidden = u.shape[0]
    dtype = x_tm.dtype
    z = _matmul2d(x_tm, w)  # (k, B, 4H), one GEMM over all steps
    z += b
    c_all = np.empty((k, batch, hidden), dtype=dtype)
    tc_all = np.empty((k, batch, hidden), dtype=dtype)
    h_all = np.empty((k, batch, hidden), dtype=dtype)
    rec = np.empty((batch, 4 * hidden), dtype=dtype)
    c_prev = np.zeros((batch, hidden), dtype=dtype)
    h = np.zeros((batch, hidden), dtype=dtype)
    for t in range(k):
        zin = z[t]
        np.matmul(h, u, out=rec)
        zin += rec
        i = zin[:, :hidden]
        f = zin[:, hidden : 2 * hidden]
        g = zin[:, 2 * hidden : 3 * hidden]
        o = zin[:, 3 * hidden :]
        _sigmoid_inplace(zin[:, : 2 * hidden])
        np.tanh(g, out=g)
        _sigmoid_inplace(o)
        c = c_all[t]
        np.multiply(i, g, out=c)
        scratch = rec[:, :hidden]
        np.multiply(f, c_prev, out=scratch)
        c += scratch
        np.tanh(c, out=tc_all[t])
        np.multiply(o, tc_all[t], out=h_all[t])
        c_prev = c
        h = h_all[t]
    return h_all, (z, c_all, tc_all, h_all, x_tm, w, u, hidden)


def lstm_seq_backward(cache, d_hall):
    """d_hall: (k, B, H) gradient on every step's hidden state."""
    z, c_all, tc_all, h_all, x_tm, w, u, hidden = cache
    k, batch, dim_in = x_tm.shape
    dtype = d_hall.dtype
    dz_all = np.empty((k, batch, 4 * hidden), dtype=dtype)
    dh_carry = np.zeros((batch, hidden), dtype=dtype)
    dc = np.zeros((batch, hidden), dtype=dtype)
    dh = np.empty((batch, hidden), dtype=dtype)
    t1 = np.empty((batch, hidden), dtype=dtype)
    u_t = np.ascontiguousarray(u.T)
    zeros = np.zeros((batch, hidden), dtype=dtype)
    for t in range(k - 1, -1, -1):
        zin = z[t]
        i = zin[:, :hidden]
        f = zin[:, hidden : 2 * hidden]
        g = zin[:, 2 * hidden : 3 * hidden]
        o = zin[:, 3 * hidden :]
        tc = tc_all[t]
        c_prev = c_all[t - 1] if t > 0 else zeros
        np.add(d_hall[t], dh_carry, out=dh)
        dz = dz_all[t]
        dzi = dz[:, :hidden]
        dzf = dz[:, hidden : 2 * hidden]
        dzg = dz[:, 2 * hidden : 3 * hidden]
        dzo = dz[:, 3 * hidden :]
        # output gate: dzo = dh * tc * o * (1 - o)
        np.multiply(dh, tc, out=dzo)
        dzo *= o
        np.subtract(1.0, o, out=t1)
        dzo *= t1
        # cell: dc += dh * o * (1 - tc^2)
        np.multiply(tc, tc, out=t1)
        np.subtract(1.0, t1, out=t1)
        t1 *= o
        t1 *= dh
        dc += t1
        # input gate: dzi = dc * g * i * (1 - i)
        np.multiply(dc, g, out=dzi)
        dzi *= i
        np.subtract(1.0, i, out=t1)
        dzi *= t1
        # forget gate: dzf = dc * c_prev * f * (1 - f)
        np.multiply(dc, c_prev, out=dzf)
        dzf *= f
        np.subtract(1.0, f, out=t1)
        dzf *= t1
        # candidate: dzg = dc * i * (1 - g^2)
        np.multiply(g, g, out=t1)
        np.subtract(1.0, t1, out=t1)
        t1 *= i
        np.multiply(dc, t1, out=dzg)
        # carries for step t-1
        dc *= f
        np.matmul(dz, u_t, out=dh_carry)
    dz_flat = _flat2(dz_all)
    d_w = _flat2(x_tm).T @ dz_flat
    h_prev = np.concatenate(
        [np.zeros((1, batch, hidden), dtype=h_all.dtype), h_all[:-1]], axis=0
    )
    d_u = _flat2(h_prev).T @ dz_flat
    d_b = dz_flat.sum(axis=0)
    d_x = _matmul2d(dz_all, w.T)
    return d_x, d_w, d_u, d_b


def lstm_layer_forward(x_seq, w, u, b):
    """Batch-major (B, k, I) wrapper around the time-major core."""
    if x_seq.ndim != 3:
        raise ValueError(f"x_seq must be (B, k, I), got shape {x_seq.shape}")
    if w.shape[0] != x_seq.shape[-1]:
        raise ValueError(f"input dim {x_seq.shape[-1]} does not match W {w.shape}")
    x_tm = np.ascontiguousarray(x_seq.transpose(1, 0, 2))
    h_all, cache = lstm_seq_forward(x_tm, w, u, b)
    return h_all.transpose(1, 0, 2), cache


def lstm_layer_backward(cache, d_hseq):
    d_hall = np.ascontiguousarray(d_hseq.transpose(1, 0, 2))
    d_x, d_w, d_u, d_b = lstm_seq_backward(cache, d_hall)
    return d_x.transpose(1, 0, 2), d_w, d_u, d_b


def lstm_forward(sequence, layer1, layer2):
    """Two stacked LSTM layers over one unbatched (k, I) sequence;
    returns the final hidden state of the second layer."""
    sequence = np.asarray(sequence)
    if sequence.ndim != 2:
        raise ValueError(f"sequence must be (k, I), got shape {sequence.shape}")
    h1, _ = lstm_seq_forward(sequence[:, None, :], *layer1)
    h2, _ = lstm_seq_forward(h1, *layer2)
    return h2[-1, 0]


# ---------------------------------------------------------------------------
# fully connected layer

def dense_forward(x, w, b, activation="relu"):
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"input dim {x.shape[-1]} does not match W {w.shape}")
    z = _matmul2d(x, w)
    z += b
    if activation == "relu":
        pos = z > 0
        np.maximum(z, 0.0, out=z)
        return z, (x, w, pos)
    if activation == "linear":
        return z, (x, w, None)
    raise ValueError(f"unknown activation {activation!r}")


def dense_backward(cache, d_out):
    x, w, pos = cache
    dz = d_out if pos is None else d_out * pos
    d_w = _flat2(x).T @ _flat2(dz)
    d_b = _flat2(dz).sum(axis=0)
    d_x = _matmul2d(dz, w.T)
    return d_x, d_w, d_b
