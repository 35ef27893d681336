"""Training internals: deterministic RNG and the compiled CBOW update loop.

The trainer offers two engines that consume an identical random-draw
schedule: the numba kernel below (fast path) and a pure-Python reference
loop in embedding.py built on cbow_step.  Keeping the schedule shared lets
tests cross-check the kernel against the oracle-verified reference update.

RNG is splitmix64: tiny, seedable, and bit-identical between the Python
and compiled implementations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
#: 2**-53; maps the top 53 bits of a uint64 onto [0, 1).
_TO_UNIT = 1.0 / 9007199254740992.0


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output_word)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def uniform64(z: int) -> float:
    return (z >> 11) * _TO_UNIT


@njit(cache=True, nogil=True)
def _splitmix64_nb(state):
    state = state + np.uint64(_GOLDEN)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, nogil=True)
def _train_pass(
    input_vectors,
    output_vectors,
    sentence_ids,
    sentence_offsets,
    keep_prob,
    cum_table,
    window,
    negatives,
    initial_lr,
    min_lr,
    processed,
    total_planned,
    max_sentence_len,
    state,
):
    """One pass over the given sentences, updating both matrices in place.

    Returns (loss_sum, update_count, processed, state).  processed counts
    scanned in-vocab positions and drives the linear learning-rate decay;
    it carries across epochs via the caller.  All gradients of one update
    are taken at the pre-update parameters, so repeated rows (a duplicated
    context word, a negative drawn twice) accumulate additively exactly as
    in the reference update.
    """
    dim = input_vectors.shape[1]
    h = np.empty(dim, dtype=np.float32)
    grad_h = np.empty(dim, dtype=np.float32)
    kept_ids = np.empty(max_sentence_len, dtype=np.int32)
    kept_lrs = np.empty(max_sentence_len, dtype=np.float64)
    out_rows = np.empty(negatives + 1, dtype=np.int64)
    out_errs = np.empty(negatives + 1, dtype=np.float64)
    lr_span = initial_lr - min_lr
    loss_sum = 0.0
    n_updates = 0

    for s in range(len(sentence_offsets) - 1):
        lo = sentence_offsets[s]
        hi = sentence_offsets[s + 1]
        n_kept = 0
        for p in range(lo, hi):
            w = sentence_ids[p]
            lr = initial_lr - lr_span * (processed / total_planned)
            if lr < min_lr:
                lr = min_lr
            processed += 1
            if keep_prob[w] < 1.0:
                state, z = _splitmix64_nb(state)
                u = float(z >> np.uint64(11)) * _TO_UNIT
                if u >= keep_prob[w]:
                    continue
            kept_ids[n_kept] = w
            kept_lrs[n_kept] = lr
            n_kept += 1

        for j in range(n_kept):
            target = kept_ids[j]
            lr = kept_lrs[j]
            c0 = j - window
            if c0 < 0:
                c0 = 0
            c1 = j + window + 1
            if c1 > n_kept:
                c1 = n_kept
            n_ctx = c1 - c0 - 1
            if n_ctx <= 0:
                continue

            for d in range(dim):
                h[d] = 0.0
            for c in range(c0, c1):
                if c == j:
                    continue
                row = kept_ids[c]
                for d in range(dim):
                    h[d] += input_vectors[row, d]
            inv_ctx = np.float32(1.0 / n_ctx)
            for d in range(dim):
                h[d] *= inv_ctx
                grad_h[d] = 0.0

            out_rows[0] = target
            for k in range(1, negatives + 1):
                while True:
                    state, z = _splitmix64_nb(state)
                    u = float(z >> np.uint64(11)) * _TO_UNIT
                    row = np.searchsorted(cum_table, u, side="right")
                    if row != target:
                        break
                out_rows[k] = row

            for k in range(negatives + 1):
                row = out_rows[k]
                label = 1.0 if k == 0 else 0.0
                score = 0.0
                for d in range(dim):
                    score += h[d] * output_vectors[row, d]
                # numerically stable sigmoid / log-sigmoid
                if score >= 0.0:
                    e = math.exp(-score)
                    sig = 1.0 / (1.0 + e)
                    log_sig = -math.log1p(e)
                else:
                    e = math.exp(score)
                    sig = e / (1.0 + e)
                    log_sig = score - math.log1p(e)
                if k == 0:
                    loss_sum -= log_sig
                else:
                    loss_sum -= log_sig - score  # log sigma(-x) = log sigma(x) - x
                err = sig - label
                out_errs[k] = err
                for d in range(dim):
                    grad_h[d] += err * output_vectors[row, d]

            for k in range(negatives + 1):
                row = out_rows[k]
                coef = np.float32(lr * out_errs[k])
                for d in range(dim):
                    output_vectors[row, d] -= coef * h[d]

            step = np.float32(lr * inv_ctx)
            for c in range(c0, c1):
                if c == j:
                    continue
                row = kept_ids[c]
                for d in range(dim):
                    input_vectors[row, d] -= step * grad_h[d]
            n_updates += 1

    return loss_sum, n_updates, processed, state
