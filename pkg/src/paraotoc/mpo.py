"""Matrix product operators: construction, gated Heisenberg evolution,
canonical forms, and infinite-temperature trace contractions.

Tensors are rank-4 arrays indexed (left bond, phys out, phys in, right
bond) with physical dimension 3.  An operator is exp(log_scale) times
the contraction of its tensors; the scale is kept separately so long
evolutions neither overflow nor silently shrink.

All the operators evolved here conserve the global three-valued charge,
so every bond index can be labeled with a charge and all matrix
factorizations (SVD, QR) act block-by-block within charge sectors.
That is both faster (three smaller factorizations instead of one) and
structurally exact: charge-forbidden matrix elements, which are pure
rounding noise, are dropped instead of being mixed into the kept basis.
Operators or gates that do not conserve the charge fall back to dense
factorizations transparently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from paraotoc.algebra import IDENTITY3, OperatorString
from paraotoc.errors import ConfigError, NumericalError
from paraotoc.models import GateLayer

_CHARGE_DETECT_TOL = 1e-12
_IDENTITY_SITE_TOL = 1e-12
_FROZEN_GATE_TOL = 1e-14
_CHUNK_TARGET_BYTES = 48 * 2 ** 20


def _svd_robust(mat: np.ndarray):
    """SVD with driver fallbacks for the occasional stubborn matrix."""
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        pass
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.svd(mat, full_matrices=False)


def charge_of_matrix(mat: np.ndarray) -> int | None:
    """Charge q such that mat[o, i] != 0 implies (o - i) % 3 == q.

    Returns None for charge-mixing matrices.  The zero matrix counts as
    charge 0.
    """
    scale = np.abs(mat).max()
    if scale == 0:
        return 0
    out, inp = np.nonzero(np.abs(mat) > _CHARGE_DETECT_TOL * scale)
    charges = set((int(o) - int(i)) % 3 for o, i in zip(out, inp))
    if len(charges) == 1:
        return charges.pop()
    return None if charges else 0


def _gate_charge_blocks(gate: np.ndarray) -> bool:
    """True when a 9x9 two-site gate conserves the pair charge."""
    pair = (np.arange(9) // 3 + np.arange(9) % 3) % 3
    mask = pair[:, None] != pair[None, :]
    off = np.linalg.norm(gate[mask])
    return off <= 1e-12 * max(1.0, np.linalg.norm(gate))


@dataclass
class TruncationReport:
    """Running account of SVD truncation over an evolution."""

    discarded_total: float = 0.0
    discarded_max: float = 0.0
    max_bond: int = 1
    svd_count: int = 0

    def record(self, discarded: float, bond_dim: int) -> None:
        self.discarded_total += discarded
        self.discarded_max = max(self.discarded_max, discarded)
        self.max_bond = max(self.max_bond, bond_dim)
        self.svd_count += 1

    def merge(self, other: "TruncationReport") -> None:
        self.discarded_total += other.discarded_total
        self.discarded_max = max(self.discarded_max, other.discarded_max)
        self.max_bond = max(self.max_bond, other.max_bond)
        self.svd_count += other.svd_count


class Mpo:
    """Matrix product operator on a chain of three-state sites."""

    def __init__(self, tensors, log_scale: float = 0.0, bond_charges=None,
                 canonical: str | None = None):
        self.tensors = list(tensors)
        if not self.tensors:
            raise ConfigError("empty tensor list")
        for i, t in enumerate(self.tensors):
            if t.ndim != 4 or t.shape[1] != 3 or t.shape[2] != 3:
                raise ConfigError(f"tensor {i} has shape {t.shape}, want (D, 3, 3, D')")
            if i and t.shape[0] != self.tensors[i - 1].shape[3]:
                raise ConfigError(f"bond dimension mismatch at site {i}")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[3] != 1:
            raise ConfigError("edge bonds must have dimension 1")
        self.log_scale = float(log_scale)
        self.bond_charges = None if bond_charges is None else [
            np.asarray(c, dtype=np.int64) for c in bond_charges]
        if self.bond_charges is not None:
            if len(self.bond_charges) != len(self.tensors) + 1:
                raise ConfigError("need one charge array per bond")
            for i, t in enumerate(self.tensors):
                if (self.bond_charges[i].size != t.shape[0]
                        or self.bond_charges[i + 1].size != t.shape[3]):
                    raise ConfigError(f"charge array size mismatch at site {i}")
        self.canonical = canonical

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[3] for t in self.tensors[:-1])

    def copy(self) -> "Mpo":
        charges = None if self.bond_charges is None else [
            c.copy() for c in self.bond_charges]
        return Mpo([t.copy() for t in self.tensors], self.log_scale, charges,
                   self.canonical)

    @classmethod
    def identity(cls, n_sites: int) -> "Mpo":
        return cls.from_string(OperatorString(n_sites))

    @classmethod
    def from_string(cls, s: OperatorString) -> "Mpo":
        """Bond-dimension-1 MPO of an operator string.

        The scalar phase lands on the first non-identity site so that
        sites outside the support stay exactly the identity tensor.
        """
        phase_site = min(s.support) - 1 if s.support else 0
        tensors = []
        charges = [np.zeros(1, dtype=np.int64)]
        q = 0
        mixed = False
        for site in range(1, s.n_sites + 1):
            mat = np.array(s.factors.get(site, IDENTITY3), dtype=np.complex128)
            if site - 1 == phase_site:
                mat = mat * s.phase
            c = charge_of_matrix(mat)
            if c is None:
                mixed = True
            else:
                q = (q + c) % 3
            charges.append(np.array([q], dtype=np.int64))
            tensors.append(mat.reshape(1, 3, 3, 1))
        return cls(tensors, 0.0, None if mixed else charges)

    def to_dense(self) -> np.ndarray:
        """Dense matrix; exponential in the chain length."""
        acc = np.ones((1, 1, 1), dtype=np.complex128)
        for t in self.tensors:
            acc = np.tensordot(acc, t, axes=([2], [0]))
            big_o = acc.shape[0] * 3
            big_i = acc.shape[1] * 3
            acc = acc.transpose(0, 2, 1, 3, 4).reshape(big_o, big_i, acc.shape[4])
        return acc[:, :, 0] * np.exp(self.log_scale)

    def site_is_identity(self, i: int) -> bool:
        """True when site i (0-based) carries an exact identity tensor."""
        t = self.tensors[i]
        if t.shape[0] != 1 or t.shape[3] != 1:
            return False
        return np.abs(t[0, :, :, 0] - IDENTITY3).max() <= _IDENTITY_SITE_TOL

    def nontrivial_window(self) -> tuple[int, int] | None:
        """(first, last) 0-based sites not exactly identity, or None."""
        flags = [not self.site_is_identity(i) for i in range(self.n_sites)]
        if not any(flags):
            return None
        return flags.index(True), len(flags) - 1 - flags[::-1].index(True)


def _split_svd(theta: np.ndarray, row_q, col_q, chi: int, cutoff: float):
    """Charge-blocked SVD with a global top-chi selection.

    Returns (U, s, Vh, mid_charges, discarded_fraction).  When row_q is
    None the whole matrix is treated as one block.
    """
    total_sq = float(np.linalg.norm(theta) ** 2)
    if total_sq == 0.0:
        raise NumericalError("operator collapsed to zero during truncation")
    blocks = []
    if row_q is None:
        u, s, vh = _svd_robust(theta)
        blocks.append((0, np.arange(theta.shape[0]), np.arange(theta.shape[1]),
                       u, s, vh))
        block_sq = total_sq
    else:
        block_sq = 0.0
        for q in range(3):
            rows = np.flatnonzero(row_q == q)
            cols = np.flatnonzero(col_q == q)
            if rows.size == 0 or cols.size == 0:
                continue
            sub = theta[np.ix_(rows, cols)]
            sub_sq = float(np.linalg.norm(sub) ** 2)
            block_sq += sub_sq
            if sub_sq == 0.0:
                continue
            u, s, vh = _svd_robust(sub)
            blocks.append((q, rows, cols, u, s, vh))
    if not blocks:
        raise NumericalError("operator collapsed to zero during truncation")

    all_s = np.concatenate([b[4] for b in blocks])
    all_q = np.concatenate([np.full(b[4].size, b[0]) for b in blocks])
    all_i = np.concatenate([np.arange(b[4].size) for b in blocks])
    # rank by size, break ties deterministically by sector then position
    order = np.lexsort((all_i, all_q, -all_s))
    s_max = all_s[order[0]]
    keep_n = 0
    for pos in order[:chi]:
        if all_s[pos] <= cutoff * s_max or all_s[pos] == 0.0:
            break
        keep_n += 1
    if keep_n == 0:
        keep_n = 1
    kept = order[:keep_n]
    kept_sq = float(np.sum(all_s[kept] ** 2))
    discarded = max(0.0, (total_sq - kept_sq) / total_sq)

    # lay the kept values out sorted by charge sector, then block position
    layout = np.lexsort((all_i[kept], all_q[kept]))
    kept = kept[layout]
    m = kept.size
    u_out = np.zeros((theta.shape[0], m), dtype=np.complex128)
    vh_out = np.zeros((m, theta.shape[1]), dtype=np.complex128)
    s_out = all_s[kept]
    charges_out = all_q[kept]
    for bi, (q, rows, cols, u, s, vh) in enumerate(blocks):
        sel = np.flatnonzero((charges_out == q))
        if sel.size == 0:
            continue
        local = all_i[kept[sel]]
        u_out[np.ix_(rows, sel)] = u[:, local]
        vh_out[np.ix_(sel, cols)] = vh[local, :]
    return u_out, s_out, vh_out, charges_out.astype(np.int64), discarded


def _row_charges(left_q: np.ndarray) -> np.ndarray:
    # row index (l, o, i) of a (D*9, X) site matrix, C-order
    out = np.arange(3)
    inp = np.arange(3)
    grid = (left_q[:, None, None] + out[None, :, None] - inp[None, None, :]) % 3
    return grid.reshape(-1)


def _col_charges(right_q: np.ndarray) -> np.ndarray:
    # column index (o, i, r) of a (X, 9*D) site matrix, C-order
    out = np.arange(3)
    inp = np.arange(3)
    grid = (right_q[None, None, :] - out[:, None, None] + inp[None, :, None]) % 3
    return grid.reshape(-1)


def _apply_gate(mpo: Mpo, bond: int, gate: np.ndarray, chi: int, cutoff: float,
                report: TruncationReport, absorb: str = "split") -> bool:
    """Conjugate the two sites of one bond by a gate and recompress.

    The gate hits the output legs and its adjoint hits the input legs in
    a single fused update, so the bond sees exactly one SVD.  ``absorb``
    places the singular values: "split" shares them square-root-wise,
    "right"/"left" keeps the touched site on that side as a pure
    isometry so a sweep can carry the orthogonality center along.
    Returns False when the frozen-region fast path left the tensors
    untouched.
    """
    i = bond - 1
    a, b = mpo.tensors[i], mpo.tensors[i + 1]
    dl, dr = a.shape[0], b.shape[3]

    if dl == 1 and a.shape[3] == 1 and dr == 1:
        # frozen-region fast path: if conjugation leaves the product
        # invariant, skip the update (exact for charge strings)
        pair = np.kron(a[0, :, :, 0], b[0, :, :, 0])
        conjugated = gate @ pair @ gate.conj().T
        if np.abs(conjugated - pair).max() <= _FROZEN_GATE_TOL * max(
                1.0, np.abs(pair).max()):
            return False
        theta_mat = conjugated.reshape(3, 3, 3, 3).transpose(
            0, 2, 1, 3).reshape(9, 9)
    else:
        g4 = gate.reshape(3, 3, 3, 3)
        theta = np.tensordot(a, b, axes=([3], [0]))       # l,o1,i1,o2,i2,r
        theta = np.tensordot(g4, theta, axes=([2, 3], [1, 3]))   # o1',o2',l,i1,i2,r
        theta = np.tensordot(theta, g4.conj(), axes=([3, 4], [2, 3]))  # o1',o2',l,r,i1',i2'
        theta = theta.transpose(2, 0, 4, 1, 5, 3)
        theta_mat = np.ascontiguousarray(theta).reshape(dl * 9, 9 * dr)

    if mpo.bond_charges is not None and not _gate_charge_blocks(gate):
        mpo.bond_charges = None
    if mpo.bond_charges is None:
        row_q = col_q = None
    else:
        row_q = _row_charges(mpo.bond_charges[i])
        col_q = _col_charges(mpo.bond_charges[i + 2])

    u, s, vh, mid_q, discarded = _split_svd(theta_mat, row_q, col_q, chi, cutoff)
    norm = float(np.linalg.norm(s))
    s = s / norm
    mpo.log_scale += np.log(norm)
    m = s.size
    if absorb == "split":
        sq = np.sqrt(s)
        left_mat, right_mat = u * sq[None, :], sq[:, None] * vh
    elif absorb == "right":
        left_mat, right_mat = u, s[:, None] * vh
    elif absorb == "left":
        left_mat, right_mat = u * s[None, :], vh
    else:
        raise ConfigError(f"absorb must be split, left, or right, got {absorb!r}")
    mpo.tensors[i] = left_mat.reshape(dl, 3, 3, m)
    mpo.tensors[i + 1] = right_mat.reshape(m, 3, 3, dr)
    if mpo.bond_charges is not None:
        mpo.bond_charges[i + 1] = mid_q
    report.record(discarded, m)
    return True


def apply_gate_layer(mpo: Mpo, layer: GateLayer, chi: int, cutoff: float,
                     report: TruncationReport) -> None:
    """Apply one layer of non-overlapping bond gates in place.

    Plain gauge-agnostic application; evolution loops should go through
    ``apply_heisenberg_step``, which truncates at the orthogonality
    center instead.
    """
    if chi < 1:
        raise ConfigError(f"bond dimension cap must be >= 1, got {chi}")
    for bond, gate in zip(layer.bonds, layer.gates):
        if not 1 <= bond <= mpo.n_sites - 1:
            raise ConfigError(f"bond {bond} outside chain")
        _apply_gate(mpo, bond, gate, chi, cutoff, report)
    mpo.canonical = None


def _gate_frozen(mpo: Mpo, bond: int, gate: np.ndarray) -> bool:
    """True when conjugating this bond provably changes nothing.

    Only dimension-one product regions qualify; there the check is a
    single 9x9 comparison, exact for charge strings and the identity.
    """
    i = bond - 1
    a, b = mpo.tensors[i], mpo.tensors[i + 1]
    if a.shape[0] != 1 or a.shape[3] != 1 or b.shape[3] != 1:
        return False
    pair = np.kron(a[0, :, :, 0], b[0, :, :, 0])
    conjugated = gate @ pair @ gate.conj().T
    return bool(np.abs(conjugated - pair).max() <= _FROZEN_GATE_TOL * max(
        1.0, np.abs(pair).max()))


def _establish_center(mpo: Mpo, pos: int) -> int:
    """Canonicalize the contiguous dim>1 segment around site ``pos``.

    Bond-dimension-1 bonds cut the chain into independently gauged
    pieces whose environments are scalars, so isometries are only
    needed inside the segment the orthogonality center lives in.
    Tensors outside it are never touched.
    """
    mpo.canonical = None
    lo = pos
    while lo > 0 and mpo.tensors[lo].shape[0] > 1:
        lo -= 1
    hi = pos
    while hi < mpo.n_sites - 1 and mpo.tensors[hi].shape[3] > 1:
        hi += 1
    for m in range(lo, pos):
        _push_right(mpo, m)
    for m in range(hi, pos, -1):
        _push_left(mpo, m)
    return pos


def _sweep_layer(mpo: Mpo, layer: GateLayer, chi: int, cutoff: float,
                 report: TruncationReport, center, forward: bool):
    """Apply one gate layer carrying the orthogonality center along.

    Frozen bonds are skipped before any gauge work, so untouched
    regions stay bit-identical.  For the rest, sites left of ``center``
    are left isometries and sites right of it right isometries; every
    SVD then sees isometric environments on both sides and its
    discarded weight is the true global error, not a gauge artifact.
    ``center`` is None until the first gate acts.  Returns the new
    center.
    """
    pairs = sorted(zip(layer.bonds, layer.gates), reverse=not forward)
    for bond, gate in pairs:
        if not 1 <= bond <= mpo.n_sites - 1:
            raise ConfigError(f"bond {bond} outside chain")
        if _gate_frozen(mpo, bond, gate):
            continue
        i = bond - 1
        target = i if forward else i + 1
        if center is None:
            center = _establish_center(mpo, target)
        while center < target:
            _push_right(mpo, center)
            center += 1
        while center > target:
            _push_left(mpo, center)
            center -= 1
        _apply_gate(mpo, bond, gate, chi, cutoff, report,
                    "right" if forward else "left")
        center = i + 1 if forward else i
    return center


def apply_heisenberg_step(mpo: Mpo, layers, chi: int,
                          cutoff: float = 1e-12) -> TruncationReport:
    """Apply a sequence of gate layers, compressing after every gate.

    Layers are swept in alternating directions with the orthogonality
    center moved gate to gate, which keeps each truncation optimal in
    the global norm.  Gauge work starts lazily at the first bond a
    gate actually changes, so frozen regions are left bit-identical.
    """
    if chi < 1:
        raise ConfigError(f"bond dimension cap must be >= 1, got {chi}")
    report = TruncationReport(max_bond=max((1, *mpo.bond_dims)))
    center = None
    forward = True
    for layer in layers:
        center = _sweep_layer(mpo, layer, chi, cutoff, report, center, forward)
        forward = not forward
    return report


def _block_qr(mat: np.ndarray, row_q, col_q):
    """Charge-blocked thin QR.  Returns (Q, R, new_charges)."""
    if row_q is None:
        q, r = scipy.linalg.qr(mat, mode="economic")
        return q, r, None
    q_cols = []
    rank = 0
    pieces = []
    for qq in range(3):
        rows = np.flatnonzero(row_q == qq)
        cols = np.flatnonzero(col_q == qq)
        if rows.size == 0 or cols.size == 0:
            continue
        sub = mat[np.ix_(rows, cols)]
        qf, rf = scipy.linalg.qr(sub, mode="economic")
        pieces.append((qq, rows, cols, qf, rf))
        rank += qf.shape[1]
    if rank == 0:
        raise NumericalError("operator collapsed to zero during canonicalization")
    q_out = np.zeros((mat.shape[0], rank), dtype=np.complex128)
    r_out = np.zeros((rank, mat.shape[1]), dtype=np.complex128)
    charges = np.empty(rank, dtype=np.int64)
    at = 0
    for qq, rows, cols, qf, rf in pieces:
        k = qf.shape[1]
        q_out[np.ix_(rows, range(at, at + k))] = qf
        r_out[np.ix_(range(at, at + k), cols)] = rf
        charges[at:at + k] = qq
        at += k
    return q_out, r_out, charges


def _push_right(mpo: Mpo, i: int) -> None:
    """QR site i into a left isometry, absorbing the factor into i+1."""
    t = mpo.tensors[i]
    dl = t.shape[0]
    mat = t.reshape(dl * 9, t.shape[3])
    if mpo.bond_charges is None:
        row_q = col_q = None
    else:
        row_q = _row_charges(mpo.bond_charges[i])
        col_q = mpo.bond_charges[i + 1]
    q, r, charges = _block_qr(mat, row_q, col_q)
    scale = float(np.linalg.norm(r))
    if scale == 0.0:
        raise NumericalError("operator collapsed to zero during canonicalization")
    r = r / scale
    mpo.log_scale += np.log(scale)
    k = q.shape[1]
    mpo.tensors[i] = q.reshape(dl, 3, 3, k)
    if mpo.bond_charges is not None:
        mpo.bond_charges[i + 1] = charges
    mpo.tensors[i + 1] = np.tensordot(r, mpo.tensors[i + 1], axes=([1], [0]))


def _push_left(mpo: Mpo, i: int) -> None:
    """LQ site i into a right isometry, absorbing the factor into i-1.

    The LQ runs through the QR of the adjoint: mat = L Q with
    Q Q^dag = 1.
    """
    t = mpo.tensors[i]
    dr = t.shape[3]
    mat = t.reshape(t.shape[0], 9 * dr)
    if mpo.bond_charges is None:
        row_q = col_q = None
    else:
        row_q = mpo.bond_charges[i]
        col_q = _col_charges(mpo.bond_charges[i + 1])
    qt, rt, charges = _block_qr(mat.conj().T, col_q, row_q)
    q = qt.conj().T
    left = rt.conj().T
    scale = float(np.linalg.norm(left))
    if scale == 0.0:
        raise NumericalError("operator collapsed to zero during canonicalization")
    left = left / scale
    mpo.log_scale += np.log(scale)
    k = q.shape[0]
    mpo.tensors[i] = q.reshape(k, 3, 3, dr)
    if mpo.bond_charges is not None:
        mpo.bond_charges[i] = charges
    mpo.tensors[i - 1] = np.tensordot(mpo.tensors[i - 1], left, axes=([3], [0]))


def left_canonicalize(mpo: Mpo, up_to: int | None = None) -> Mpo:
    """Bring sites 1..up_to (1-based) into left-isometry form, in place.

    Defaults to the whole chain but the last site, which absorbs the
    running factor.  Returns the same object for chaining.
    """
    n = mpo.n_sites
    up_to = n - 1 if up_to is None else int(up_to)
    if not 0 <= up_to <= n - 1:
        raise ConfigError(f"up_to must be in 0..{n - 1}, got {up_to}")
    for i in range(up_to):
        _push_right(mpo, i)
    mpo.canonical = "left" if up_to == n - 1 else None
    return mpo


def right_canonicalize(mpo: Mpo, down_to: int | None = None) -> Mpo:
    """Bring sites down_to..N (1-based) into right-isometry form, in
    place.  Defaults to all but the first site."""
    n = mpo.n_sites
    down_to = 2 if down_to is None else int(down_to)
    if not 2 <= down_to <= n + 1:
        raise ConfigError(f"down_to must be in 2..{n + 1}, got {down_to}")
    for i in range(n - 1, down_to - 2, -1):
        _push_left(mpo, i)
    mpo.canonical = "right" if down_to == 2 else None
    return mpo


def frobenius_unitarity(mpo: Mpo) -> float:
    """Normalized Frobenius weight <W^dag W> at infinite temperature.

    Equals 1 for any exactly represented unitary; each truncation bites
    a little off, so this is the running health metric of an evolution.
    """
    env = np.ones((1, 1), dtype=np.complex128)
    log_acc = 0.0
    for t in mpo.tensors:
        step = np.tensordot(env, t, axes=([1], [0]))
        env = np.tensordot(t.conj(), step, axes=([0, 1, 2], [0, 1, 2])) / 3.0
        peak = np.abs(env).max()
        if peak == 0.0:
            return 0.0
        env = env / peak
        log_acc += np.log(peak)
    value = env[0, 0] * np.exp(log_acc + 2.0 * mpo.log_scale)
    return float(value.real)


def _string_site_factors(v: OperatorString, n_sites: int):
    factors = {}
    for site, mat in v.factors.items():
        factors[site - 1] = np.asarray(mat, dtype=np.complex128)
    first = min(factors) if factors else 0
    factors[first] = factors.get(first, IDENTITY3) * v.phase
    return factors


def otoc_sandwich_string(w: Mpo, v: OperatorString, side: str = "left") -> complex:
    """Infinite-temperature four-layer trace <W† V† W V> with V a string.

    ``side='left'`` skips every site left of V's support using the
    left-isometry property of W; ``side='right'`` mirrors that;
    ``side='none'`` contracts everything (reference path).
    """
    n = w.n_sites
    if v.n_sites != n:
        raise ConfigError(f"chain length mismatch: {v.n_sites} vs {n}")
    factors = _string_site_factors(v, n)
    lo, hi = 0, n - 1
    if side == "left":
        if w.canonical != "left":
            raise ConfigError("side='left' needs a left-canonical MPO")
        lo = min(factors) if factors else 0
    elif side == "right":
        if w.canonical != "right":
            raise ConfigError("side='right' needs a right-canonical MPO")
        hi = max(factors) if factors else n - 1
    elif side != "none":
        raise ConfigError(f"side must be left, right, or none, got {side!r}")

    dim = w.tensors[lo].shape[0]
    env = np.eye(dim, dtype=np.complex128)
    log_acc = 0.0
    for i in range(lo, hi + 1):
        t = w.tensors[i]
        if i in factors:
            f = factors[i]
            mid = np.einsum("pu,lpqr,qx->luxr", f.conj(), t, f, optimize=True)
        else:
            mid = t
        step = np.tensordot(env, mid, axes=([1], [0]))
        env = np.tensordot(t.conj(), step, axes=([0, 1, 2], [0, 1, 2])) / 3.0
        peak = np.abs(env).max()
        if peak == 0.0:
            return 0.0
        env = env / peak
        log_acc += np.log(peak)
    if side == "right":
        closed = np.trace(env)
    else:
        closed = env[0, 0]
    skipped = lo + (n - 1 - hi)
    return complex(closed * np.exp(log_acc + 2.0 * w.log_scale
                                   - skipped * np.log(3.0)))


def _mpo_site_transfer(env, wt, vt):
    """One site of the four-layer two-MPO transfer, chunked over the
    third environment axis to bound scratch memory."""
    dwl = wt.shape[0]
    dwr = wt.shape[3]
    dvl = vt.shape[0]
    dvr = vt.shape[3]
    out = np.zeros((dwr, dvr, dwr, dvr), dtype=np.complex128)
    per_chunk = dvl * dvl * 9 * dwr * 16
    chunk = max(1, int(_CHUNK_TARGET_BYTES // max(1, per_chunk)))
    wc = wt.conj()
    vc = vt.conj()
    for start in range(0, dwl, chunk):
        sel = slice(start, min(start + chunk, dwl))
        t1 = np.tensordot(env[:, :, sel, :], wc, axes=([0], [0]))
        t2 = np.tensordot(t1, vc, axes=([0, 3], [0, 2]))
        t3 = np.tensordot(t2, vt, axes=([1, 2], [0, 2]))
        t4 = np.tensordot(t3, wt[sel], axes=([0, 2, 4], [0, 1, 2]))
        out += t4.transpose(0, 1, 3, 2)
    return out


def otoc_sandwich_mpo(w: Mpo, v: Mpo, side: str = "left") -> complex:
    """Infinite-temperature trace <W† V† W V> for two MPOs.

    Sites where V is exactly the identity collapse to the two-layer
    W-transfer; combined with the matching canonical form of W those
    sites contribute exactly nothing and are skipped.
    """
    n = w.n_sites
    if v.n_sites != n:
        raise ConfigError(f"chain length mismatch: {v.n_sites} vs {n}")
    window = v.nontrivial_window()
    lo, hi = 0, n - 1
    if window is None:
        side = "none"
    elif side == "left":
        if w.canonical != "left":
            raise ConfigError("side='left' needs a left-canonical MPO")
        lo = window[0]
    elif side == "right":
        if w.canonical != "right":
            raise ConfigError("side='right' needs a right-canonical MPO")
        hi = window[1]
    elif side != "none":
        raise ConfigError(f"side must be left, right, or none, got {side!r}")

    dw = w.tensors[lo].shape[0]
    dv = v.tensors[lo].shape[0]
    env = np.einsum("ij,kl->ikjl", np.eye(dw), np.eye(dv)).astype(np.complex128)
    log_acc = 0.0
    for i in range(lo, hi + 1):
        wt = w.tensors[i]
        vt = v.tensors[i]
        if vt.shape[0] == 1 and vt.shape[3] == 1:
            f = vt[0, :, :, 0]
            mid = np.einsum("pu,lpqr,qx->luxr", f.conj(), wt, f, optimize=True)
            sq = env[:, 0, :, 0]
            step = np.tensordot(sq, mid, axes=([1], [0]))
            nxt = np.tensordot(wt.conj(), step, axes=([0, 1, 2], [0, 1, 2]))
            env = nxt[:, None, :, None] / 3.0
        else:
            env = _mpo_site_transfer(env, wt, vt) / 3.0
        peak = np.abs(env).max()
        if peak == 0.0:
            return 0.0
        env = env / peak
        log_acc += np.log(peak)
    if side == "right":
        closed = np.einsum("abab->", env)
    else:
        closed = env[0, 0, 0, 0]
    skipped = lo + (n - 1 - hi)
    return complex(closed * np.exp(log_acc + 2.0 * (w.log_scale + v.log_scale)
                                   - skipped * np.log(3.0)))


_MAGIC = b"POMPO"
_VERSION = 1


def save_mpo(mpo: Mpo, path) -> None:
    """Binary checkpoint: versioned header, shapes, charges, payload."""
    with open(path, "wb") as fh:
        flags = 1 if mpo.bond_charges is not None else 0
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, mpo.n_sites, flags))
        fh.write(struct.pack("<d", mpo.log_scale))
        for t in mpo.tensors:
            fh.write(struct.pack("<II", t.shape[0], t.shape[3]))
        if mpo.bond_charges is not None:
            for c in mpo.bond_charges:
                fh.write(np.asarray(c, dtype=np.uint8).tobytes())
        for t in mpo.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_mpo(path) -> Mpo:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ConfigError(f"{path}: not an MPO checkpoint")
        version, n_sites, flags = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {version}")
        (log_scale,) = struct.unpack("<d", fh.read(8))
        shapes = [struct.unpack("<II", fh.read(8)) for _ in range(n_sites)]
        charges = None
        if flags & 1:
            dims = [shapes[0][0]] + [s[1] for s in shapes]
            charges = []
            for d in dims:
                raw = np.frombuffer(fh.read(d), dtype=np.uint8)
                charges.append(raw.astype(np.int64))
        tensors = []
        for dl, dr in shapes:
            count = dl * 3 * 3 * dr
            raw = np.frombuffer(fh.read(count * 16), dtype="<c16")
            tensors.append(raw.reshape(dl, 3, 3, dr).astype(np.complex128))
        return Mpo(tensors, log_scale, charges)
