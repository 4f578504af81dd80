"""Low-level compute kernels for layer forward/backward and bit-sliced eval.

Activations live in node-major layout: an array of shape (width, batch)
whose row m is node/input m across the batch.  Every kernel writes each
output row from exactly one parallel iteration, so results are bitwise
reproducible for any thread count.

Numba-jitted kernels are used when available; `use_numba(False)` or the
BOOLNET_DISABLE_NUMBA environment variable selects the pure-numpy
fallbacks (same math, array-at-a-time).
"""

from __future__ import annotations

import os

import numpy as np

from .gates import BILINEAR, TRUTH_TABLES

try:
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_use_numba = _HAVE_NUMBA and not os.environ.get("BOOLNET_DISABLE_NUMBA")

_G4 = np.ascontiguousarray(BILINEAR)  # (16, 4) float64
_TT = np.ascontiguousarray(TRUTH_TABLES)  # (16, 4) uint8


def use_numba(on: bool) -> None:
    global _use_numba
    _use_numba = bool(on) and _HAVE_NUMBA


def numba_active() -> bool:
    return _use_numba


def set_threads(n: int) -> None:
    """Cap worker threads for the jitted kernels (0 = leave default)."""
    if _HAVE_NUMBA and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def build_reverse_index(m1: np.ndarray, m2: np.ndarray, in_width: int):
    """CSR transpose of a pair table: which (node, side) consume input m.

    Returns (offsets, packed) where packed[offsets[m]:offsets[m+1]] holds
    node*2 + side (side 0 = first operand) for every consumer of input m.
    """
    d = m1.size
    cat = np.concatenate([m1, m2])
    packed_all = np.concatenate(
        [np.arange(d, dtype=np.int64) * 2, np.arange(d, dtype=np.int64) * 2 + 1]
    )
    order = np.argsort(cat, kind="stable")
    counts = np.bincount(cat, minlength=in_width)
    offsets = np.zeros(in_width + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, packed_all[order].astype(np.int64)


# ---------------------------------------------------------------------------
# numpy fallbacks


def _np_soft_forward(x, m1, m2, coefs):
    a = x[m1]
    b = x[m2]
    out = coefs[:, 0, None] + coefs[:, 1, None] * a + coefs[:, 2, None] * b
    out += coefs[:, 3, None] * (a * b)
    return out


def _np_logit_grads(x, m1, m2, coefs, pi, gz):
    g = gz.astype(np.float64, copy=False)
    a = x[m1].astype(np.float64, copy=False)
    b = x[m2].astype(np.float64, copy=False)
    s = np.empty((m1.size, 4), dtype=np.float64)
    s[:, 0] = g.sum(axis=1)
    s[:, 1] = (g * a).sum(axis=1)
    s[:, 2] = (g * b).sum(axis=1)
    s[:, 3] = (g * a * b).sum(axis=1)
    q = s @ _G4.T
    t = (coefs.astype(np.float64) * s).sum(axis=1)
    return (pi * (q - t[:, None])).astype(pi.dtype)


def _np_input_grads(x, m1, m2, coefs, gz, rev_offsets, rev_packed, in_width):
    a = x[m1]
    b = x[m2]
    ga = gz * (coefs[:, 1, None] + coefs[:, 3, None] * b)
    gb = gz * (coefs[:, 2, None] + coefs[:, 3, None] * a)
    gx = np.zeros((in_width, x.shape[1]), dtype=x.dtype)
    np.add.at(gx, m1, ga)
    np.add.at(gx, m2, gb)
    return gx


def _np_hard_forward(x, m1, m2, ops):
    idx = 2 * x[m1].astype(np.intp) + x[m2]
    return _TT[ops[:, None], idx]


# ---------------------------------------------------------------------------
# numba kernels

if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _nb_soft_forward(x, m1, m2, coefs, out):
        width, batch = out.shape
        for o in prange(width):
            ra = x[m1[o]]
            rb = x[m2[o]]
            c0 = coefs[o, 0]
            c1 = coefs[o, 1]
            c2 = coefs[o, 2]
            c3 = coefs[o, 3]
            ro = out[o]
            for i in range(batch):
                a = ra[i]
                b = rb[i]
                ro[i] = c0 + c1 * a + c2 * b + c3 * a * b

    @njit(parallel=True, cache=True)
    def _nb_logit_grads(x, m1, m2, coefs, pi, gz, g4, gw):
        width, batch = gz.shape
        for o in prange(width):
            ra = x[m1[o]]
            rb = x[m2[o]]
            ro = gz[o]
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for i in range(batch):
                g = np.float64(ro[i])
                a = np.float64(ra[i])
                b = np.float64(rb[i])
                s0 += g
                s1 += g * a
                s2 += g * b
                s3 += g * a * b
            t = coefs[o, 0] * s0 + coefs[o, 1] * s1 + coefs[o, 2] * s2 + coefs[o, 3] * s3
            for j in range(16):
                q = g4[j, 0] * s0 + g4[j, 1] * s1 + g4[j, 2] * s2 + g4[j, 3] * s3
                gw[o, j] = pi[o, j] * (q - t)

    @njit(parallel=True, cache=True)
    def _nb_input_grads(x, m1, m2, coefs, gz, rev_offsets, rev_packed, gx):
        in_width, batch = gx.shape
        for m in prange(in_width):
            row = gx[m]
            for i in range(batch):
                row[i] = 0.0
            for e in range(rev_offsets[m], rev_offsets[m + 1]):
                o = rev_packed[e] >> 1
                side = rev_packed[e] & 1
                g = gz[o]
                c3 = coefs[o, 3]
                if side == 0:
                    partner = x[m2[o]]
                    c = coefs[o, 1]
                else:
                    partner = x[m1[o]]
                    c = coefs[o, 2]
                for i in range(batch):
                    row[i] += g[i] * (c + c3 * partner[i])

    @njit(parallel=True, cache=True)
    def _nb_hard_forward(x, m1, m2, ops, out):
        width, batch = out.shape
        for o in prange(width):
            ra = x[m1[o]]
            rb = x[m2[o]]
            op = ops[o]
            ro = out[o]
            for i in range(batch):
                # opcode value is the truth table big-endian over (a,b)
                k = 2 * ra[i] + rb[i]
                ro[i] = (op >> (3 - k)) & 1

    @njit(parallel=True, cache=True)
    def _nb_bitslice_eval(ops, fa, fb, words, class_starts, class_refs, n_examples, counts):
        d0, n_words = words.shape
        n_nodes = ops.size
        n_classes = class_starts.size - 1
        full = np.uint64(0xFFFFFFFFFFFFFFFF)
        for w in prange(n_words):
            vals = np.empty(2 + d0 + n_nodes, dtype=np.uint64)
            vals[0] = np.uint64(0)
            vals[1] = full
            for j in range(d0):
                vals[2 + j] = words[j, w]
            for k in range(n_nodes):
                a = vals[fa[k]]
                b = vals[fb[k]]
                op = ops[k]
                if op == 0:
                    r = np.uint64(0)
                elif op == 1:
                    r = a & b
                elif op == 2:
                    r = a & ~b
                elif op == 3:
                    r = a
                elif op == 4:
                    r = ~a & b
                elif op == 5:
                    r = b
                elif op == 6:
                    r = a ^ b
                elif op == 7:
                    r = a | b
                elif op == 8:
                    r = ~(a | b)
                elif op == 9:
                    r = ~(a ^ b)
                elif op == 10:
                    r = ~b
                elif op == 11:
                    r = a | ~b
                elif op == 12:
                    r = ~a
                elif op == 13:
                    r = ~a | b
                elif op == 14:
                    r = ~(a & b)
                else:
                    r = full
                vals[2 + d0 + k] = r
            lane_count = min(64, n_examples - w * 64)
            for c in range(n_classes):
                for e in range(class_starts[c], class_starts[c + 1]):
                    word = vals[class_refs[e]]
                    for lane in range(lane_count):
                        counts[w * 64 + lane, c] += (word >> np.uint64(lane)) & np.uint64(1)

    @njit(cache=True)
    def _nb_netlist_depths(fa, fb, d0, n_nodes):
        depth = np.zeros(2 + d0 + n_nodes, dtype=np.int64)
        for k in range(n_nodes):
            da = depth[fa[k]]
            db = depth[fb[k]]
            depth[2 + d0 + k] = 1 + (da if da > db else db)
        return depth


# ---------------------------------------------------------------------------
# dispatch


def soft_forward(x, m1, m2, coefs):
    if _use_numba:
        out = np.empty((m1.size, x.shape[1]), dtype=x.dtype)
        _nb_soft_forward(x, m1, m2, coefs, out)
        return out
    return _np_soft_forward(x, m1, m2, coefs)


def logit_grads(x, m1, m2, coefs, pi, gz):
    if _use_numba:
        gw = np.empty((m1.size, 16), dtype=pi.dtype)
        _nb_logit_grads(
            x, m1, m2, coefs.astype(np.float64), pi, gz, _G4, gw
        )
        return gw
    return _np_logit_grads(x, m1, m2, coefs, pi, gz)


def input_grads(x, m1, m2, coefs, gz, rev_offsets, rev_packed, in_width):
    if _use_numba:
        gx = np.empty((in_width, x.shape[1]), dtype=x.dtype)
        _nb_input_grads(x, m1, m2, coefs, gz, rev_offsets, rev_packed, gx)
        return gx
    return _np_input_grads(x, m1, m2, coefs, gz, rev_offsets, rev_packed, in_width)


def hard_forward(x, m1, m2, ops):
    if _use_numba:
        out = np.empty((m1.size, x.shape[1]), dtype=np.uint8)
        _nb_hard_forward(x, m1, m2, ops, out)
        return out
    return _np_hard_forward(x, m1, m2, ops)


def pack_lanes(bits: np.ndarray) -> np.ndarray:
    """Pack (n_examples, d0) {0,1} rows into (d0, n_words) uint64 lanes.

    Lane l of word w is example 64*w + l (little-endian by example).
    """
    n, d0 = bits.shape
    n_words = (n + 63) // 64
    cols = np.zeros((d0, n_words * 64), dtype=np.uint8)
    cols[:, :n] = bits.T
    packed = np.packbits(cols, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(d0, n_words)


def bitslice_eval(ops, fa, fb, words, class_starts, class_refs, n_examples):
    """Per-lane class popcounts for a packed batch -> (n_examples, C) counts."""
    n_words = words.shape[1]
    n_classes = class_starts.size - 1
    counts = np.zeros((n_words * 64, n_classes), dtype=np.uint32)
    if _use_numba:
        _nb_bitslice_eval(ops, fa, fb, words, class_starts, class_refs, n_examples, counts)
        return counts[:n_examples]
    d0 = words.shape[0]
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    vals = np.empty((2 + d0 + ops.size, n_words), dtype=np.uint64)
    vals[0] = 0
    vals[1] = full
    vals[2 : 2 + d0] = words
    word_ops = [
        lambda a, b: np.zeros_like(a),
        lambda a, b: a & b,
        lambda a, b: a & ~b,
        lambda a, b: a,
        lambda a, b: ~a & b,
        lambda a, b: b,
        lambda a, b: a ^ b,
        lambda a, b: a | b,
        lambda a, b: ~(a | b),
        lambda a, b: ~(a ^ b),
        lambda a, b: ~b,
        lambda a, b: a | ~b,
        lambda a, b: ~a,
        lambda a, b: ~a | b,
        lambda a, b: ~(a & b),
        lambda a, b: np.full_like(a, full),
    ]
    for k in range(ops.size):
        vals[2 + d0 + k] = word_ops[ops[k]](vals[fa[k]], vals[fb[k]])
    for c in range(n_classes):
        refs = class_refs[class_starts[c] : class_starts[c + 1]]
        lanes = np.unpackbits(
            vals[refs].view(np.uint8).reshape(refs.size, -1), axis=1, bitorder="little"
        )
        counts[:, c] = lanes.sum(axis=0, dtype=np.uint32)
    return counts[:n_examples]


def netlist_depths(fa, fb, d0, n_nodes):
    """Gate depth per ref (inputs and constants are depth 0)."""
    if _use_numba:
        return _nb_netlist_depths(fa, fb, d0, n_nodes)
    depth = np.zeros(2 + d0 + n_nodes, dtype=np.int64)
    for k in range(n_nodes):
        depth[2 + d0 + k] = 1 + max(depth[fa[k]], depth[fb[k]])
    return depth
