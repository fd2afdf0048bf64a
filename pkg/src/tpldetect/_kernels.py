# Numba inner loops for distributed-memory paragraph vectors with negative sampling.
#
# All kernels release the GIL so shards can be trained from several threads
# writing into the same matrices without locks.

import numpy as np
from numba import njit

_LCG_MUL = np.uint64(25214903917)
_LCG_ADD = np.uint64(11)


@njit(nogil=True, cache=True)
def next_random(state):
    state[0] = state[0] * _LCG_MUL + _LCG_ADD
    return state[0] >> np.uint64(16)


@njit(nogil=True, cache=True)
def draw_negative(cum_table, state):
    r = next_random(state) % np.uint64(cum_table[-1])
    return np.searchsorted(cum_table, r, side="right")


@njit(nogil=True, cache=True)
def _log_sigmoid(x):
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(nogil=True, cache=True)
def sgd_step(doc_vec, context, targets, labels, W, U, lr, train_words, train_out, h, grad_h,
             input_scale):
    """One negative-sampling update for a single predicted word.

    The hidden layer is the mean of the document vector and the context word
    vectors. Returns the loss before the update.
    """
    n = context.shape[0] + 1
    size = doc_vec.shape[0]
    for j in range(size):
        h[j] = doc_vec[j]
    for c in range(context.shape[0]):
        w = context[c]
        for j in range(size):
            h[j] += W[w, j]
    for j in range(size):
        h[j] /= n
        grad_h[j] = 0.0
    loss = 0.0
    for t in range(targets.shape[0]):
        u = targets[t]
        dot = 0.0
        for j in range(size):
            dot += U[u, j] * h[j]
        if labels[t] > 0:
            loss -= _log_sigmoid(dot)
            g = 1.0 / (1.0 + np.exp(-dot)) - 1.0
        else:
            loss -= _log_sigmoid(-dot)
            g = 1.0 / (1.0 + np.exp(-dot))
        for j in range(size):
            grad_h[j] += g * U[u, j]
        if train_out:
            for j in range(size):
                U[u, j] -= lr * g * h[j]
    scale = lr * input_scale / n
    for j in range(size):
        doc_vec[j] -= scale * grad_h[j]
    if train_words:
        for c in range(context.shape[0]):
            w = context[c]
            for j in range(size):
                W[w, j] -= scale * grad_h[j]
    return loss


@njit(nogil=True, cache=True)
def train_document(doc_vec, words, W, U, cum_table, window, negative, lr,
                   state, train_words, train_out):
    """One pass over ``words``; returns (summed loss, number of predictions)."""
    size = doc_vec.shape[0]
    n_words = words.shape[0]
    h = np.empty(size, dtype=W.dtype)
    grad_h = np.empty(size, dtype=W.dtype)
    context = np.empty(2 * window, dtype=np.int64)
    targets = np.empty(negative + 1, dtype=np.int64)
    labels = np.zeros(negative + 1, dtype=np.int8)
    labels[0] = 1
    total = 0.0
    for i in range(n_words):
        n_ctx = 0
        lo = max(0, i - window)
        hi = min(n_words, i + window + 1)
        for k in range(lo, hi):
            if k != i:
                context[n_ctx] = words[k]
                n_ctx += 1
        targets[0] = words[i]
        n_t = 1
        for _ in range(negative):
            w = draw_negative(cum_table, state)
            if w != words[i]:
                targets[n_t] = w
                n_t += 1
        # The input-side step is lr * (context size), i.e. each input vector
        # moves by lr times the gradient of the hidden layer.
        total += sgd_step(doc_vec, context[:n_ctx], targets[:n_t], labels[:n_t], W, U, lr,
                          train_words, train_out, h, grad_h, float(n_ctx + 1))
    return total, n_words


@njit(nogil=True, cache=True)
def train_shard(doc_ids, offsets, flat_words, D, W, U, cum_table, window, negative,
                lr_start, lr_end, progress_start, progress_total, state):
    """Train every document of a shard once, decaying the learning rate linearly.

    ``progress_start``/``progress_total`` place this shard on the global
    schedule so that the rate depends on (epoch, document), not on threads.
    """
    total = 0.0
    count = 0
    for k in range(doc_ids.shape[0]):
        d = doc_ids[k]
        frac = (progress_start + k) / progress_total
        lr = lr_start - (lr_start - lr_end) * frac
        words = flat_words[offsets[d]:offsets[d + 1]]
        loss, n = train_document(D[d], words, W, U, cum_table, window, negative, lr,
                                 state, True, True)
        total += loss
        count += n
    return total, count


@njit(nogil=True, cache=True)
def infer_document(doc_vec, words, W, U, cum_table, window, negative, lr_start, lr_end,
                   epochs, state):
    for e in range(epochs):
        lr = lr_start - (lr_start - lr_end) * e / epochs
        train_document(doc_vec, words, W, U, cum_table, window, negative, lr, state,
                       False, False)
