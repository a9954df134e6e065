"""Quasi-cyclic LDPC codes in the 5G new-radio style.

Codes are built from lifted base graphs (BG1 46x68, BG2 42x52, shift tables
shipped as data files), with systematic encoding, filler-bit shortening and
parity puncturing to hit exact (n_bits, k_bits) targets. The transmitted
word is [information bits, leading parity bits]; every systematic bit is
transmitted, which the amplitude-shaping transmitter relies on. Decoding is
flooding belief propagation with the exact tanh product rule, batched over
frames.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = ["LdpcCode", "build_code", "encode", "decode_bp", "decode_bp_batch", "export_alist"]

LLR_CLIP = 38.0

_LIFT_SETS = (
    (2, 4, 8, 16, 32, 64, 128, 256),
    (3, 6, 12, 24, 48, 96, 192, 384),
    (5, 10, 20, 40, 80, 160, 320),
    (7, 14, 28, 56, 112, 224),
    (9, 18, 36, 72, 144, 288),
    (11, 22, 44, 88, 176, 352),
    (13, 26, 52, 104, 208),
    (15, 30, 60, 120, 240),
)

_BG_SHAPE = {1: (46, 68), 2: (42, 52)}
_BG_KB = {1: 22, 2: 10}
_BG_ENTRIES = {1: 316, 2: 197}


@functools.lru_cache(maxsize=None)
def _load_base_graph(bg: int):
    """Parse a base-graph shift table: {(row, col): (s0..s7)}, validated."""
    name = f"bg{bg}.txt"
    text = resources.files("pamlab.data").joinpath(name).read_text()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 10:
            raise ValueError(f"{name}: bad line {line!r}")
        r, c = int(parts[0]), int(parts[1])
        shifts = tuple(int(v) for v in parts[2:])
        if (r, c) in table:
            raise ValueError(f"{name}: duplicate entry ({r}, {c})")
        table[(r, c)] = shifts
    nrows, ncols = _BG_SHAPE[bg]
    if len(table) != _BG_ENTRIES[bg]:
        raise ValueError(f"{name}: {len(table)} entries, expected {_BG_ENTRIES[bg]}")
    kb = _BG_KB[bg]
    for (r, c), shifts in table.items():
        if not (0 <= r < nrows and 0 <= c < ncols):
            raise ValueError(f"{name}: entry ({r}, {c}) out of range")
        for s, v in enumerate(shifts):
            if not (0 <= v < max(_LIFT_SETS[s])):
                raise ValueError(f"{name}: shift {v} out of range for set {s}")
        if c >= kb + 4 and any(v != 0 for v in shifts):
            raise ValueError(f"{name}: extension parity column {c} must have shift 0")
    for r in range(4, nrows):
        if (r, kb + 4 + (r - 4)) not in table:
            raise ValueError(f"{name}: row {r} lacks its extension parity column")
    return table


def _select_bg(k_bits: int, rate: float) -> int:
    if k_bits <= 292 or (k_bits <= 3824 and rate <= 0.67) or rate <= 0.25:
        bg = 2
    else:
        bg = 1
    if bg == 1 and k_bits > 8448:
        raise ValueError(f"k={k_bits} too large for base graph 1")
    if bg == 2 and k_bits > 3840:
        raise ValueError(f"k={k_bits} too large for base graph 2")
    if bg == 1 and rate < 1 / 3:
        raise ValueError("base graph 1 supports rates >= 1/3")
    if bg == 2 and rate < 1 / 5:
        raise ValueError("base graph 2 supports rates >= 1/5")
    return bg


def _select_lifting(k_bits: int, bg: int):
    """Smallest lifting size with k_b * Z >= k_bits; returns (Z, set index)."""
    if bg == 1:
        kb = 22
    elif k_bits > 640:
        kb = 10
    elif k_bits > 560:
        kb = 9
    elif k_bits > 192:
        kb = 8
    else:
        kb = 6
    best = None
    for i_ls, zs in enumerate(_LIFT_SETS):
        for z in zs:
            if kb * z >= k_bits and (best is None or kb * z < kb * best[0]):
                best = (z, i_ls)
    if best is None:
        raise ValueError(f"no lifting size fits k={k_bits}")
    return best


def _pack_rows(mat: np.ndarray) -> np.ndarray:
    """Pack a (r, c) binary matrix into (r, ceil(c/64)) uint64 words."""
    r, c = mat.shape
    pad = (-c) % 64
    if pad:
        mat = np.concatenate([mat, np.zeros((r, pad), dtype=mat.dtype)], axis=1)
    bits = np.packbits(mat.astype(np.uint8), axis=1, bitorder="little")
    return bits.reshape(r, -1, 8).copy().view(np.uint64).reshape(r, -1)


def _gf2_inverse_packed(mat: np.ndarray) -> np.ndarray:
    """Inverse of a square GF(2) matrix, packed Gauss-Jordan."""
    n = mat.shape[0]
    work = _pack_rows(np.concatenate([mat, np.eye(n, dtype=np.uint8)], axis=1))
    words = work.shape[1]
    for col in range(n):
        w, b = divmod(col, 64)
        mask = np.uint64(1) << np.uint64(b)
        rows = np.nonzero(work[:, w] & mask)[0]
        pivot_candidates = rows[rows >= col]
        if len(pivot_candidates) == 0:
            raise ValueError("parity core is singular over GF(2)")
        p = pivot_candidates[0]
        if p != col:
            work[[col, p]] = work[[p, col]]
        hit = np.nonzero(work[:, w] & mask)[0]
        hit = hit[hit != col]
        work[hit] ^= work[col]
    # extract the right half bit-exactly (it is not word aligned in general)
    bits = np.unpackbits(work.view(np.uint8), axis=1, bitorder="little")
    return _pack_rows(bits[:, n : 2 * n])


def _popcount_matvec(packed: np.ndarray, vec_packed: np.ndarray) -> np.ndarray:
    """(packed GF(2) matrix) @ vec over GF(2); vec_packed is (words,)."""
    acc = np.bitwise_count(packed & vec_packed[None, :]).sum(axis=1)
    return (acc & 1).astype(np.uint8)


def _pack_vec(v: np.ndarray) -> np.ndarray:
    return _pack_rows(v.reshape(1, -1))[0]


@dataclass(frozen=True)
class LdpcCode:
    """A built code: lifted structure plus cached encode/decode artifacts."""

    bg: int
    z: int
    i_ls: int
    n_bits: int
    k_bits: int
    k_ldpc: int
    n_fillers: int
    n_parity: int
    # encode structures
    _core_rows: tuple = field(repr=False)
    _ext_rows: tuple = field(repr=False)
    _core_inv: np.ndarray = field(repr=False)
    # decode graph (edges sorted by check)
    _edge_var: np.ndarray = field(repr=False)
    _check_ptr: np.ndarray = field(repr=False)
    _var_perm: np.ndarray = field(repr=False)
    _var_ptr: np.ndarray = field(repr=False)
    _n_vars: int = field(repr=False)

    @property
    def rate(self):
        return self.k_bits / self.n_bits

    @property
    def n_checks(self) -> int:
        return len(self._check_ptr) - 1


def _lifted_edges(entries, z, kb, k_bits, n_parity, n_pvars):
    """Edge lists (check_row, var_id) for the pruned decode graph.

    Variables: [systematic 0..k_bits) then parity 0..n_pvars). Filler
    columns and never-transmitted extension rows are dropped; core parity
    columns always stay (they may be punctured but are multiply connected).
    """
    t = np.arange(z)
    rows_out, vars_out = [], []
    krows = []
    for (r, c), shift in entries:
        cc = (t + shift) % z
        if c < kb:
            var = c * z + cc
            keep = var < k_bits
        elif c < kb + 4:
            var = k_bits + (c - kb) * z + cc
            keep = np.ones(z, dtype=bool)
        else:
            p_idx = 4 * z + (c - kb - 4) * z + cc
            var = k_bits + p_idx
            keep = p_idx < n_parity
        rows_out.append((r * z + t)[keep])
        vars_out.append(var[keep])
    return np.concatenate(rows_out), np.concatenate(vars_out)


@functools.lru_cache(maxsize=8)
def build_code(n_bits: int, k_bits: int) -> LdpcCode:
    """Construct the code hitting the exact (n_bits, k_bits) target.

    Base graph and lifting size follow the standard selection rules; the
    systematic part is shortened with filler zeros down to k_bits and the
    parity sequence truncated to n_bits - k_bits transmitted bits.
    """
    if not (0 < k_bits < n_bits):
        raise ValueError(f"bad code target ({n_bits}, {k_bits})")
    rate = k_bits / n_bits
    bg = _select_bg(k_bits, rate)
    z, i_ls = _select_lifting(k_bits, bg)
    kb = _BG_KB[bg]
    nrows, _ = _BG_SHAPE[bg]
    k_ldpc = kb * z
    n_fillers = k_ldpc - k_bits
    n_parity = n_bits - k_bits
    if n_parity > (nrows) * z:
        raise ValueError(f"target ({n_bits}, {k_bits}) needs more parity than the graph has")

    table = _load_base_graph(bg)
    entries = sorted((rc, shifts[i_ls]) for rc, shifts in table.items())

    # parity core B: lifted columns kb..kb+4 of rows 0..3
    core = np.zeros((4 * z, 4 * z), dtype=np.uint8)
    t = np.arange(z)
    core_rows, ext_rows = [], []
    for (r, c), shift in entries:
        if r < 4 and kb <= c < kb + 4:
            core[r * z + t, (c - kb) * z + (t + shift) % z] ^= 1
        if r < 4 and c < kb:
            core_rows.append((r, c, shift))
        if r >= 4 and c < kb + 4:
            ext_rows.append((r, c, shift))
    core_inv = _gf2_inverse_packed(core)

    # decode graph: core rows always; extension row blocks only while their
    # own parity bit is transmitted
    n_pvars = max(4 * z, n_parity)
    kept = []
    for (r, c), shift in entries:
        if r < 4:
            kept.append(((r, c), shift))
        else:
            own_start = 4 * z + (r - 4) * z
            if own_start < n_parity:
                kept.append(((r, c), shift))
    rows, cols = _lifted_edges(kept, z, kb, k_bits, n_parity, n_pvars)
    # drop check rows whose own extension parity is punctured
    max_row = 4 * z + max(0, n_parity - 4 * z)
    keep = rows < max_row
    rows, cols = rows[keep], cols[keep]
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    # compact check indices (all rows < max_row are present and dense)
    n_checks = max_row
    counts = np.bincount(rows, minlength=n_checks)
    check_ptr = np.concatenate([[0], np.cumsum(counts)])
    var_perm = np.argsort(cols, kind="stable")
    n_vars = k_bits + n_pvars
    vcounts = np.bincount(cols, minlength=n_vars)
    var_ptr = np.concatenate([[0], np.cumsum(vcounts)])

    return LdpcCode(
        bg=bg,
        z=z,
        i_ls=i_ls,
        n_bits=n_bits,
        k_bits=k_bits,
        k_ldpc=k_ldpc,
        n_fillers=n_fillers,
        n_parity=n_parity,
        _core_rows=tuple(core_rows),
        _ext_rows=tuple(ext_rows),
        _core_inv=core_inv,
        _edge_var=cols.astype(np.int64),
        _check_ptr=check_ptr.astype(np.int64),
        _var_perm=var_perm.astype(np.int64),
        _var_ptr=var_ptr.astype(np.int64),
        _n_vars=n_vars,
    )


def _apply_circulant(block_vecs, r, c, shift, z, acc):
    acc[r * z : (r + 1) * z] ^= np.roll(block_vecs[c * z : (c + 1) * z], -shift)


def encode(code: LdpcCode, info) -> np.ndarray:
    """Systematic encoding: returns the transmitted word [info, parity].

    Parity solves the lifted parity checks with filler zeros appended to
    the information word; only the first n_bits - k_bits parity bits are
    transmitted.
    """
    info = np.asarray(info, dtype=np.uint8).reshape(-1)
    if len(info) != code.k_bits:
        raise ValueError(f"info must be {code.k_bits} bits, got {len(info)}")
    z = code.z
    u = np.concatenate([info, np.zeros(code.n_fillers, dtype=np.uint8)])
    # s = A u on the four core rows
    s = np.zeros(4 * z, dtype=np.uint8)
    for r, c, shift in code._core_rows:
        _apply_circulant(u, r, c, shift, z, s)
    p_core = _popcount_matvec(code._core_inv, _pack_vec(s))
    # extension parities: p_ext(row) = C1 u + C2 p_core (identity shift 0)
    n_ext = max(0, code.n_parity - 4 * z)
    n_ext_blocks = (n_ext + z - 1) // z
    p_ext = np.zeros(n_ext_blocks * z, dtype=np.uint8)
    for r, c, shift in code._ext_rows:
        if r - 4 >= n_ext_blocks:
            continue
        if c < _BG_KB[code.bg]:
            p_ext[(r - 4) * z : (r - 3) * z] ^= np.roll(u[c * z : (c + 1) * z], -shift)
        else:
            cc = c - _BG_KB[code.bg]
            p_ext[(r - 4) * z : (r - 3) * z] ^= np.roll(p_core[cc * z : (cc + 1) * z], -shift)
    parity = np.concatenate([p_core, p_ext])[: code.n_parity]
    return np.concatenate([info, parity])


def syndrome_ok(code: LdpcCode, word) -> bool:
    """Check the transmitted word against the pruned decode graph."""
    word = np.asarray(word, dtype=np.uint8).reshape(-1)
    if len(word) != code.n_bits:
        raise ValueError(f"word must be {code.n_bits} bits")
    vals = np.zeros(code._n_vars, dtype=np.uint8)
    vals[: code.k_bits] = word[: code.k_bits]
    vals[code.k_bits : code.k_bits + code.n_parity] = word[code.k_bits :]
    if code._n_vars > code.k_bits + code.n_parity:
        # punctured core parity must be reconstructed for an exact check
        full = encode(code, word[: code.k_bits])
        if not np.array_equal(full, word):
            return False
        return True
    sums = np.add.reduceat(vals[code._edge_var], code._check_ptr[:-1])
    return bool(np.all(sums % 2 == 0))


def decode_bp_batch(code: LdpcCode, llrs, max_iters: int):
    """Flooding sum-product decoding of a batch of frames.

    llrs has shape (B, n_bits) with the convention log(P[bit=0]/P[bit=1]);
    punctured parity positions are initialized to zero internally. Returns
    (bits (B, n_bits), converged (B,), iters (B,)).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim == 1:
        llrs = llrs[None, :]
    B = llrs.shape[0]
    if llrs.shape[1] != code.n_bits:
        raise ValueError(f"LLR vector must have length {code.n_bits}")
    V = code._n_vars
    ev, cptr = code._edge_var, code._check_ptr
    vperm, vptr = code._var_perm, code._var_ptr
    E = len(ev)

    chan = np.zeros((B, V))
    chan[:, : code.k_bits] = llrs[:, : code.k_bits]
    chan[:, code.k_bits : code.k_bits + code.n_parity] = llrs[:, code.k_bits :]
    np.clip(chan, -LLR_CLIP, LLR_CLIP, out=chan)

    out_bits = np.zeros((B, V), dtype=np.uint8)
    out_conv = np.zeros(B, dtype=bool)
    out_iters = np.full(B, max_iters, dtype=np.int64)

    active = np.arange(B)
    c2v = np.zeros((B, E))

    def totals(c2v_act, chan_act):
        per_var = np.add.reduceat(c2v_act[:, vperm], vptr[:-1], axis=1)
        # reduceat yields garbage where a variable has no edges; mask them
        empty = vptr[:-1] == vptr[1:]
        if empty.any():
            per_var[:, empty] = 0.0
        return chan_act + per_var

    reps = np.diff(cptr)
    n_tx = code.k_bits + code.n_parity
    for it in range(1, max_iters + 1):
        ch = chan[active]
        tot = totals(c2v, ch)
        v2c = np.clip(tot[:, ev] - c2v, -LLR_CLIP, LLR_CLIP)

        # exact tanh product rule; |t| floored so segment products of the
        # densest checks stay representable, then divided out per edge
        t = np.tanh(v2c * 0.5)
        sign = np.where(t < 0, -1.0, 1.0)
        t_abs = np.maximum(np.abs(t), 1e-15)
        seg_prod = np.multiply.reduceat(t_abs, cptr[:-1], axis=1)
        seg_sign = np.add.reduceat((sign < 0).astype(np.int8), cptr[:-1], axis=1)
        ext_mag = np.repeat(seg_prod, reps, axis=1) / t_abs
        ext_mag = np.minimum(ext_mag, 1.0 - 1e-16)
        ext_sign = 1.0 - 2.0 * ((np.repeat(seg_sign, reps, axis=1) - (sign < 0)) & 1)
        c2v = ext_sign * np.arctanh(ext_mag) * 2.0
        np.clip(c2v, -LLR_CLIP, LLR_CLIP, out=c2v)

        tot = totals(c2v, ch)
        hard = (tot < 0).astype(np.uint8)
        seg_par = np.add.reduceat(hard[:, ev], cptr[:-1], axis=1) % 2
        decided = np.abs(tot[:, :n_tx]).min(axis=1) > 1e-9
        ok = decided & ~np.any(seg_par, axis=1)
        if ok.any():
            idx = active[ok]
            out_bits[idx] = hard[ok]
            out_conv[idx] = True
            out_iters[idx] = it
            keep = ~ok
            active = active[keep]
            c2v = c2v[keep]
            if len(active) == 0:
                break
    if len(active):
        ch = chan[active]
        tot = totals(c2v, ch)
        out_bits[active] = (tot < 0).astype(np.uint8)

    tx = np.concatenate(
        [out_bits[:, : code.k_bits], out_bits[:, code.k_bits : code.k_bits + code.n_parity]],
        axis=1,
    )
    return tx, out_conv, out_iters


def decode_bp(code: LdpcCode, llrs, max_iters: int = 200):
    """Single-frame wrapper around decode_bp_batch."""
    bits, conv, iters = decode_bp_batch(code, np.asarray(llrs)[None, :], max_iters)
    return bits[0], bool(conv[0]), int(iters[0])


def export_alist(code: LdpcCode, path) -> None:
    """Write the pruned decode parity-check matrix in alist format."""
    ev, cptr = code._edge_var, code._check_ptr
    n_checks = len(cptr) - 1
    V = code._n_vars
    col_lists = [[] for _ in range(V)]
    row_lists = []
    for r in range(n_checks):
        cols = ev[cptr[r] : cptr[r + 1]]
        row_lists.append(cols)
        for c in cols:
            col_lists[c].append(r)
    dmax_c = max(len(x) for x in col_lists)
    dmax_r = max(len(x) for x in row_lists)
    with open(path, "w") as f:
        f.write(f"{V} {n_checks}\n{dmax_c} {dmax_r}\n")
        f.write(" ".join(str(len(x)) for x in col_lists) + "\n")
        f.write(" ".join(str(len(x)) for x in row_lists) + "\n")
        for x in col_lists:
            pad = [0] * (dmax_c - len(x))
            f.write(" ".join(str(v + 1) for v in x) + (" " if pad else "") + " ".join(map(str, pad)) + "\n")
        for x in row_lists:
            pad = [0] * (dmax_r - len(x))
            f.write(" ".join(str(v + 1) for v in x) + (" " if pad else "") + " ".join(map(str, pad)) + "\n")
