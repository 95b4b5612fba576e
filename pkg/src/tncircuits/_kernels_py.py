"""Vectorized numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module; used when the
extension is not built or ``TNCIRCUITS_PURE_PYTHON`` is set.
"""

import numpy as np


def dup_gather(flat, raw_shape, group_of, out_shape):
    """out[k_1..k_m] = t[k_{group_of[0]}, ..., k_{group_of[n-1]}], flattened."""
    raw_shape = np.asarray(raw_shape, dtype=np.intp)
    out_shape = tuple(int(s) for s in out_shape)
    if len(raw_shape) == 0:
        return np.array(flat, dtype=np.float64).reshape(-1)
    strides = np.ones(len(raw_shape), dtype=np.intp)
    strides[:-1] = np.cumprod(raw_shape[::-1])[::-1][1:]
    # stride of each output index = sum of raw strides in its group
    out_strides = np.zeros(len(out_shape), dtype=np.intp)
    np.add.at(out_strides, np.asarray(group_of, dtype=np.intp), strides)
    offsets = np.zeros(1, dtype=np.intp)
    for ext, st in zip(out_shape, out_strides):
        offsets = (offsets[:, None] + np.arange(ext, dtype=np.intp)[None, :] * st).ravel()
    return np.asarray(flat, dtype=np.float64)[offsets]


def conv_onehot(configs, weights, table, pad):
    """First conv layer on one-hot inputs.

    configs (B, n_in) ints; weights (K, r_out, M); table (n_out, K) with -1
    for out-of-bounds window slots, whose factor is the constant ``pad``.
    """
    configs = np.asarray(configs, dtype=np.intp)
    B = configs.shape[0]
    n_out, K = table.shape
    out = np.ones((B, n_out, weights.shape[1]))
    for k in range(K):
        src = table[:, k]
        inb = src >= 0
        # weights[k][:, s] for every (b, p) in bounds
        cols = configs[:, src[inb]]  # (B, n_inb)
        out[:, inb, :] *= np.moveaxis(weights[k][:, cols], 0, -1)
        if not inb.all():
            out[:, ~inb, :] *= pad
    return out


def conv(x, weights, table, pad):
    """out[b, p, i] = prod_k sum_j weights[k, i, j] * x[b, table[p, k], j]."""
    B = x.shape[0]
    n_out, K = table.shape
    out = np.ones((B, n_out, weights.shape[1]))
    for k in range(K):
        src = table[:, k]
        inb = src >= 0
        out[:, inb, :] *= x[:, src[inb], :] @ weights[k].T
        if not inb.all():
            out[:, ~inb, :] *= pad
    return out


def pool(x, table, pad):
    """Entrywise product pooling: out[b, p, i] = prod_k x[b, table[p, k], i]."""
    B, _, r = x.shape
    n_out, K = table.shape
    out = np.ones((B, n_out, r))
    for k in range(K):
        src = table[:, k]
        inb = src >= 0
        out[:, inb, :] *= x[:, src[inb], :]
        if not inb.all():
            out[:, ~inb, :] *= pad
    return out


def rac_amplitudes(hidden, inputs, h0, out_w, n_steps, m):
    """All M**N outputs of a stacked multiplicative RNN, lexicographic order.

    Walks the prefix tree of configurations: after step t the hidden states
    of every length-t prefix are held as rows, so each step costs one matrix
    product per layer.
    """
    depth = len(hidden)
    H = [np.asarray(h, dtype=np.float64)[None, :] for h in h0]
    for _ in range(n_steps):
        a = H[0] @ hidden[0].T
        below = (a[:, None, :] * inputs[0].T[None, :, :]).reshape(-1, a.shape[1])
        new = [below]
        for l in range(1, depth):
            a = np.repeat(H[l] @ hidden[l].T, m, axis=0)
            below = a * (below @ inputs[l].T)
            new.append(below)
        H = new
    return H[-1] @ np.asarray(out_w, dtype=np.float64)
