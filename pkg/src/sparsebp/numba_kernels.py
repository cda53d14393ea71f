"""Compiled message-update kernels and sweep passes.

All kernels share the same inlined update bodies so that the single-update
API, the grid-specialized passes and the generic edge-list passes perform
bitwise-identical arithmetic.  Summation runs over ascending x_i for every
output entry; this fixed association keeps results reproducible across runs
and between code paths.

Kernel ids: 0 = standard (dense O(M^2)), 1 = fast (floor + residuals,
O(mM)), 2 = pruned (floor forced to zero, O(mM), lossy).

Message layout conventions:
* generic passes: ``msgs[d]`` is the length-M vector of directed edge d.
* grid passes: ``msgs[k, n]`` is the message into node n from its neighbor
  in direction k (0 = above, 1 = left, 2 = right, 3 = below).  Border slots
  with no neighbor hold the multiplicative identity (1 in the sum domain,
  0 in the log domain) and are never written, which removes all border
  branches from the hot loop.

Dense tables are passed transposed (``tableT[x_j, x_i] = f(x_i, x_j)``) so
the inner dot product runs over contiguous memory.
"""

import numpy as np
from numba import njit

STANDARD, FAST, PRUNED = 0, 1, 2


# ---------------------------------------------------------------------------
# update bodies (inlined into every caller)
# ---------------------------------------------------------------------------


@njit(inline="always")
def _std_sum(h, tableT, out, M):
    for xj in range(M):
        acc = 0.0
        for xi in range(M):
            acc += tableT[xj, xi] * h[xi]
        out[xj] = acc


@njit(inline="always")
def _fast_sum(h, fbar, indptr, indices, residuals, out, M):
    S = 0.0
    for xi in range(M):
        S += h[xi]
    base = fbar * S
    for xj in range(M):
        acc = base
        for k in range(indptr[xj], indptr[xj + 1]):
            acc += residuals[k] * h[indices[k]]
        out[xj] = acc


@njit(inline="always")
def _pruned_sum(h, indptr, indices, values, out, M):
    for xj in range(M):
        acc = 0.0
        for k in range(indptr[xj], indptr[xj + 1]):
            acc += values[k] * h[indices[k]]
        out[xj] = acc


@njit(inline="always")
def _std_max(h, tableT, out, M):
    for xj in range(M):
        acc = tableT[xj, 0] + h[0]
        for xi in range(1, M):
            v = tableT[xj, xi] + h[xi]
            if v > acc:
                acc = v
        out[xj] = acc


@njit(inline="always")
def _fast_max(h, fbar, indptr, indices, values, out, M):
    H = h[0]
    for xi in range(1, M):
        if h[xi] > H:
            H = h[xi]
    floor_branch = fbar + H
    for xj in range(M):
        acc = floor_branch
        for k in range(indptr[xj], indptr[xj + 1]):
            v = values[k] + h[indices[k]]
            if v > acc:
                acc = v
        out[xj] = acc


@njit(inline="always")
def _pruned_max(h, indptr, indices, values, out, M):
    for xj in range(M):
        acc = -np.inf
        for k in range(indptr[xj], indptr[xj + 1]):
            v = values[k] + h[indices[k]]
            if v > acc:
                acc = v
        out[xj] = acc


@njit(inline="always")
def _normalize_sum_into(out, dest, M):
    """Divide by the entry sum; returns False on an all-zero/non-finite sum."""
    s = 0.0
    for x in range(M):
        s += out[x]
    if not (s > 0.0) or s == np.inf:
        return False
    inv = 1.0 / s
    for x in range(M):
        dest[x] = out[x] * inv
    return True


@njit(inline="always")
def _normalize_max_into(out, dest, M):
    """Subtract the max entry; returns False when the max is not finite."""
    mx = out[0]
    for x in range(1, M):
        if out[x] > mx:
            mx = out[x]
    if not np.isfinite(mx):
        return False
    for x in range(M):
        dest[x] = out[x] - mx
    return True


# ---------------------------------------------------------------------------
# single-update entry points (back the public kernel API)
# ---------------------------------------------------------------------------


@njit(cache=True)
def std_sum_single(h, tableT):
    out = np.empty_like(h)
    _std_sum(h, tableT, out, h.shape[0])
    return out


@njit(cache=True)
def fast_sum_single(h, fbar, indptr, indices, residuals):
    out = np.empty_like(h)
    _fast_sum(h, fbar, indptr, indices, residuals, out, h.shape[0])
    return out


@njit(cache=True)
def pruned_sum_single(h, indptr, indices, values):
    out = np.empty_like(h)
    _pruned_sum(h, indptr, indices, values, out, h.shape[0])
    return out


@njit(cache=True)
def std_max_single(h, tableT):
    out = np.empty_like(h)
    _std_max(h, tableT, out, h.shape[0])
    return out


@njit(cache=True)
def fast_max_single(h, fbar, indptr, indices, values):
    out = np.empty_like(h)
    _fast_max(h, fbar, indptr, indices, values, out, h.shape[0])
    return out


@njit(cache=True)
def pruned_max_single(h, indptr, indices, values):
    out = np.empty_like(h)
    _pruned_max(h, indptr, indices, values, out, h.shape[0])
    return out


# ---------------------------------------------------------------------------
# grid-specialized sweep passes
# ---------------------------------------------------------------------------
#
# Directions: 0 = left-to-right, 1 = right-to-left, 2 = top-to-bottom,
# 3 = bottom-to-top.  The caller supplies the pairwise potential already
# oriented for the pass direction (source state as the summation variable).
# Returns -1 on success, or the flat source-node index of the first
# degenerate (unnormalizable) message.
#
# One function per (domain, kernel) pair: keeping unused kernels' inlined
# bodies out of the hot loop measurably tightens codegen, and the scaling
# benchmark rides on these loops.


@njit(inline="always")
def _grid_h_sum(unary, m0, m1, m2, m3, n, excl, h, M):
    for x in range(M):
        h[x] = unary[n, x]
    if excl != 0:
        for x in range(M):
            h[x] *= m0[n, x]
    if excl != 1:
        for x in range(M):
            h[x] *= m1[n, x]
    if excl != 2:
        for x in range(M):
            h[x] *= m2[n, x]
    if excl != 3:
        for x in range(M):
            h[x] *= m3[n, x]


@njit(inline="always")
def _grid_h_max(log_unary, m0, m1, m2, m3, n, excl, h, M):
    for x in range(M):
        h[x] = log_unary[n, x]
    if excl != 0:
        for x in range(M):
            h[x] += m0[n, x]
    if excl != 1:
        for x in range(M):
            h[x] += m1[n, x]
    if excl != 2:
        for x in range(M):
            h[x] += m2[n, x]
    if excl != 3:
        for x in range(M):
            h[x] += m3[n, x]


@njit(inline="always")
def _grid_step(direction, H, W):
    """Per-direction iteration geometry.

    Returns (n_lines, line_len, line_stride, step, excl, write_dir, origin);
    a source node is ``line * line_stride + origin + pos * step`` and the
    message is written into slot ``write_dir`` of node ``src + step``.
    """
    if direction == 0:    # left-to-right: exclude msg from right, write "from left"
        return H, W - 1, W, 1, 2, 1, 0
    elif direction == 1:  # right-to-left
        return H, W - 1, W, -1, 1, 2, W - 1
    elif direction == 2:  # top-to-bottom
        return W, H - 1, 1, W, 3, 0, 0
    else:                 # bottom-to-top
        return W, H - 1, 1, -W, 0, 3, (H - 1) * W


@njit(inline="always")
def _norm_sum_store(out, mw, dst, M):
    s = 0.0
    for x in range(M):
        s += out[x]
    if not (s > 0.0) or s == np.inf:
        return False
    inv = 1.0 / s
    for x in range(M):
        mw[dst, x] = out[x] * inv
    return True


@njit(inline="always")
def _norm_max_store(out, mw, dst, M):
    mx = out[0]
    for x in range(1, M):
        if out[x] > mx:
            mx = out[x]
    if not np.isfinite(mx):
        return False
    for x in range(M):
        mw[dst, x] = out[x] - mx
    return True


@njit(cache=True)
def grid_pass_sum_standard(direction, H, W, M, unary, msgs, tableT, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_sum(unary, m0, m1, m2, m3, src, excl, h, M)
            _std_sum(h, tableT, out, M)
            done += 1
            if not _norm_sum_store(out, mw, src + step, M):
                madds[0] += M * M * done
                return src
    madds[0] += M * M * done
    return -1


@njit(cache=True)
def grid_pass_sum_fast(direction, H, W, M, unary, msgs,
                       fbar, indptr, indices, residuals, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_sum(unary, m0, m1, m2, m3, src, excl, h, M)
            _fast_sum(h, fbar, indptr, indices, residuals, out, M)
            done += 1
            if not _norm_sum_store(out, mw, src + step, M):
                madds[0] += (indptr[M] + 2 * M) * done
                return src
    madds[0] += (indptr[M] + 2 * M) * done
    return -1


@njit(cache=True)
def grid_pass_sum_pruned(direction, H, W, M, unary, msgs,
                         indptr, indices, values, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_sum(unary, m0, m1, m2, m3, src, excl, h, M)
            _pruned_sum(h, indptr, indices, values, out, M)
            done += 1
            if not _norm_sum_store(out, mw, src + step, M):
                madds[0] += indptr[M] * done
                return src
    madds[0] += indptr[M] * done
    return -1


@njit(cache=True)
def grid_pass_max_standard(direction, H, W, M, log_unary, msgs, tableT, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_max(log_unary, m0, m1, m2, m3, src, excl, h, M)
            _std_max(h, tableT, out, M)
            done += 1
            if not _norm_max_store(out, mw, src + step, M):
                madds[0] += M * M * done
                return src
    madds[0] += M * M * done
    return -1


@njit(cache=True)
def grid_pass_max_fast(direction, H, W, M, log_unary, msgs,
                       fbar, indptr, indices, values, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_max(log_unary, m0, m1, m2, m3, src, excl, h, M)
            _fast_max(h, fbar, indptr, indices, values, out, M)
            done += 1
            if not _norm_max_store(out, mw, src + step, M):
                madds[0] += (indptr[M] + 2 * M) * done
                return src
    madds[0] += (indptr[M] + 2 * M) * done
    return -1


@njit(cache=True)
def grid_pass_max_pruned(direction, H, W, M, log_unary, msgs,
                         indptr, indices, values, madds):
    n_lines, line_len, line_stride, step, excl, wdir, origin = _grid_step(direction, H, W)
    m0, m1, m2, m3 = msgs[0], msgs[1], msgs[2], msgs[3]
    mw = msgs[wdir]
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    done = 0
    for line in range(n_lines):
        base = line * line_stride + origin
        for pos in range(line_len):
            src = base + pos * step
            _grid_h_max(log_unary, m0, m1, m2, m3, src, excl, h, M)
            _pruned_max(h, indptr, indices, values, out, M)
            done += 1
            if not _norm_max_store(out, mw, src + step, M):
                madds[0] += indptr[M] * done
                return src
    madds[0] += indptr[M] * done
    return -1


# ---------------------------------------------------------------------------
# generic edge-list sweep passes
# ---------------------------------------------------------------------------
#
# ``order`` lists directed-edge ids in update sequence.  Incoming edges of a
# node are listed ascending by source id; h multiplies them in that order,
# which matches the grid passes' up/left/right/down order exactly.
# Oriented potential q of a directed edge indexes ``tablesT[q]`` and rows of
# ``indptrs``, whose entries are absolute offsets into the flat CSC arrays.
# Returns -1 on success or the offending directed-edge id.


@njit(inline="always")
def _generic_h(values_in, msgs, in_indptr, in_eids, i, skip_eid, h, M, is_log):
    for x in range(M):
        h[x] = values_in[i, x]
    for p in range(in_indptr[i], in_indptr[i + 1]):
        e = in_eids[p]
        if e == skip_eid:
            continue
        if is_log:
            for x in range(M):
                h[x] += msgs[e, x]
        else:
            for x in range(M):
                h[x] *= msgs[e, x]


@njit(cache=True)
def generic_pass_sum(order, kernel, M, src, rev, opid, in_indptr, in_eids,
                     unary, msgs, tablesT, fbars, indptrs,
                     indices_flat, values_flat, residuals_flat, madds):
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    for oi in range(order.shape[0]):
        d = order[oi]
        i = src[d]
        q = opid[d]
        _generic_h(unary, msgs, in_indptr, in_eids, i, rev[d], h, M, False)
        if kernel == STANDARD:
            _std_sum(h, tablesT[q], out, M)
            madds[0] += M * M
        elif kernel == FAST:
            _fast_sum(h, fbars[q], indptrs[q], indices_flat, residuals_flat, out, M)
            madds[0] += (indptrs[q, M] - indptrs[q, 0]) + 2 * M
        else:
            _pruned_sum(h, indptrs[q], indices_flat, values_flat, out, M)
            madds[0] += indptrs[q, M] - indptrs[q, 0]
        if not _normalize_sum_into(out, msgs[d], M):
            return d
    return -1


@njit(cache=True)
def generic_pass_max(order, kernel, M, src, rev, opid, in_indptr, in_eids,
                     log_unary, msgs, tablesT, fbars, indptrs,
                     indices_flat, values_flat, madds):
    h = np.empty(M, dtype=np.float64)
    out = np.empty(M, dtype=np.float64)
    for oi in range(order.shape[0]):
        d = order[oi]
        i = src[d]
        q = opid[d]
        _generic_h(log_unary, msgs, in_indptr, in_eids, i, rev[d], h, M, True)
        if kernel == STANDARD:
            _std_max(h, tablesT[q], out, M)
            madds[0] += M * M
        elif kernel == FAST:
            _fast_max(h, fbars[q], indptrs[q], indices_flat, values_flat, out, M)
            madds[0] += (indptrs[q, M] - indptrs[q, 0]) + 2 * M
        else:
            _pruned_max(h, indptrs[q], indices_flat, values_flat, out, M)
            madds[0] += indptrs[q, M] - indptrs[q, 0]
        if not _normalize_max_into(out, msgs[d], M):
            return d
    return -1
