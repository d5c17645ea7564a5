"""The three-stage lifting transform on a grid hierarchy.

Each coarsening step splits the signal over the fine grid into kept and
detail slots, predicts every detail from its group's survivor, applies the
measure-weighted update that preserves local averages, and (for the
average-interpolating stage) subtracts a second prediction obtained from a
first-degree polynomial fitted to neighboring region averages.  All steps
are exactly invertible; multilevel forward/inverse drivers operate on
batches so that a whole time series is transformed in one pass.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import kernels
from .domain import Volume, VolumeSeries
from .errors import StructuralError, VolumeFormatError
from .hierarchy import GridHierarchy, hierarchy_hash

EIG_THRESHOLD = 1e-10


class Stage(str, Enum):
    LAZY = "lazy"
    HAAR = "haar"
    AI = "ai"


@dataclass(frozen=True)
class TransformOptions:
    stage: Stage = Stage.AI
    levels: int = 1
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


@dataclass
class LevelOps:
    """Precomputed arrays for one coarsening step (coarse level c)."""

    keep_idx: np.ndarray
    det_idx: np.ndarray
    det_km: np.ndarray
    mu_det: np.ndarray
    mu_c: np.ndarray
    group_ptr: np.ndarray
    group_det: np.ndarray
    u_raw: sp.csr_matrix          # raw detail measures, rows = coarse slots
    p2: sp.csr_matrix | None      # polynomial prediction, rows = detail slots
    full_rank: np.ndarray | None  # per detail slot: polynomial fit had full rank


class PyramidLayout:
    """Flat coefficient layout: approx block, then details coarse to fine."""

    def __init__(self, hierarchy: GridHierarchy, top_level: int):
        self.top_level = top_level
        self.n_levels = hierarchy.levels
        self.approx_size = hierarchy.n_members(top_level)
        self.detail_sizes = [hierarchy.n_details(c)
                             for c in range(top_level, hierarchy.levels)]
        offs = [self.approx_size]
        for s in self.detail_sizes:
            offs.append(offs[-1] + s)
        self.offsets = offs
        self.total = offs[-1]

    def detail_slice(self, coarse_level: int) -> slice:
        i = coarse_level - self.top_level
        return slice(self.offsets[i], self.offsets[i + 1])

    @property
    def approx_slice(self) -> slice:
        return slice(0, self.approx_size)


class CoefficientPyramid:
    """Approximation and detail coefficients of one transformed volume."""

    def __init__(self, hierarchy, top_level, stage, normalized, data):
        data = np.ascontiguousarray(data, dtype=np.float64)
        self.hierarchy = hierarchy
        self.top_level = int(top_level)
        self.stage = Stage(stage)
        self.normalized = bool(normalized)
        self.layout = PyramidLayout(hierarchy, self.top_level)
        if data.shape != (self.layout.total,):
            raise StructuralError(
                f"pyramid data has {data.shape}, expected ({self.layout.total},)")
        self.data = data

    @property
    def approx(self) -> np.ndarray:
        return self.data[self.layout.approx_slice]

    def detail(self, coarse_level: int) -> np.ndarray:
        return self.data[self.layout.detail_slice(coarse_level)]

    def detail_levels(self) -> range:
        return range(self.top_level, self.hierarchy.levels)

    def copy(self) -> "CoefficientPyramid":
        return CoefficientPyramid(self.hierarchy, self.top_level, self.stage,
                                  self.normalized, self.data.copy())


def _selection(idx, n_cols):
    return sp.csr_matrix(
        (np.ones(len(idx)), idx, np.arange(len(idx) + 1)),
        shape=(len(idx), n_cols))


class Transform:
    """A lifting transform bound to one hierarchy and one set of options.

    Construction precomputes everything that depends only on geometry
    (index maps, update weights, polynomial predictors), so one instance
    can serve many forward/inverse applications, including batched ones.
    """

    def __init__(self, hierarchy: GridHierarchy, options: TransformOptions):
        if options.levels > hierarchy.levels:
            raise ValueError(
                f"options.levels={options.levels} exceeds hierarchy levels={hierarchy.levels}")
        self.hierarchy = hierarchy
        self.options = options
        self.top_level = hierarchy.levels - options.levels
        self.layout = PyramidLayout(hierarchy, self.top_level)
        self._ops = {c: self._build_level_ops(c)
                     for c in range(self.top_level, hierarchy.levels)}
        self._matrices = {}
        self._synthesis = None
        self._norms = None

    # -- construction -----------------------------------------------------

    def _build_level_ops(self, c: int) -> LevelOps:
        h = self.hierarchy
        m = h.merges[c]
        mu_f = h.measures[c + 1]
        mu_det = np.ascontiguousarray(mu_f[m.det_idx])
        u_raw = sp.csr_matrix(
            (mu_det[m.group_det], m.group_det, m.group_ptr),
            shape=(m.n_coarse, m.n_detail))
        p2 = full_rank = None
        if self.options.stage == Stage.AI:
            p2, full_rank = self._build_poly_predictor(c)
        return LevelOps(
            keep_idx=np.ascontiguousarray(m.keep_idx),
            det_idx=np.ascontiguousarray(m.det_idx),
            det_km=np.ascontiguousarray(m.det_km),
            mu_det=mu_det,
            mu_c=np.ascontiguousarray(h.measures[c]),
            group_ptr=np.ascontiguousarray(m.group_ptr),
            group_det=np.ascontiguousarray(m.group_det),
            u_raw=u_raw, p2=p2, full_rank=full_rank)

    def _build_poly_predictor(self, c: int):
        """Sparse predictor of detail-slot average differences at level c.

        For every coarse slot, a first-degree polynomial is fitted (least
        squares) to the region averages over the slot itself and its
        neighbors; the predicted detail is the difference of the fine
        region averages of that polynomial, which depends only on its
        linear part.  Monomials are centred on the fit set so that the
        eigen-thresholded minimum-norm solve keeps constants exact even
        when the fit is rank deficient.
        """
        h = self.hierarchy
        m = h.merges[c]
        nc, nm = m.n_coarse, m.n_detail
        ndim = h.domain.dim
        indptr, indices = h.adjacency[c]
        deg = np.diff(indptr)
        r_g = deg + 1
        total = int(r_g.sum())

        new_ptr = indptr + np.arange(nc + 1)
        fm = np.empty(total, dtype=np.int64)
        self_pos = new_ptr[:-1]
        is_self = np.zeros(total, dtype=bool)
        is_self[self_pos] = True
        fm[is_self] = np.arange(nc)
        fm[~is_self] = indices
        seg = np.repeat(np.arange(nc), r_g)

        pts = h.centroids[c][fm, :ndim]
        sums = np.zeros((nc, ndim))
        np.add.at(sums, seg, pts)
        cbar = sums / r_g[:, None]
        centered = pts - cbar[seg]

        scat = np.zeros((nc, ndim, ndim))
        np.add.at(scat, seg, centered[:, :, None] * centered[:, None, :])
        evals, evecs = np.linalg.eigh(scat)
        thr = EIG_THRESHOLD * np.maximum(r_g.astype(float), evals[:, -1])
        inv_evals = np.where(evals > thr[:, None], 1.0 / np.where(evals > 0, evals, 1.0), 0.0)
        spinv = np.einsum("gij,gj,gkj->gik", evecs, inv_evals, evecs)
        full_rank_group = (r_g > thr) & np.all(evals > thr[:, None], axis=1)

        # Coefficient of each fit entry in the fitted linear part.
        t_entry = np.einsum("eij,ej->ei", spinv[seg], centered)

        delta = (h.centroids[c + 1][m.det_idx, :ndim]
                 - h.centroids[c + 1][m.keep_idx[m.det_km], :ndim])
        counts = r_g[m.det_km]
        row_ptr = np.concatenate([[0], np.cumsum(counts)])
        nnz = int(row_ptr[-1])
        within = np.arange(nnz) - np.repeat(row_ptr[:-1], counts)
        ent_start = new_ptr[:-1]
        entry_index = np.repeat(ent_start[m.det_km], counts) + within
        cols = fm[entry_index]
        vals = np.sum(t_entry[entry_index] * np.repeat(delta, counts, axis=0), axis=1)
        p2 = sp.csr_matrix((vals, cols, row_ptr), shape=(nm, nc))
        return p2, full_rank_group[m.det_km]

    def level_ops(self, coarse_level: int) -> LevelOps:
        if coarse_level not in self._ops:
            raise StructuralError(f"level {coarse_level} is outside the transform range")
        return self._ops[coarse_level]

    def full_rank_details(self, coarse_level: int) -> np.ndarray:
        ops = self.level_ops(coarse_level)
        if ops.full_rank is None:
            raise StructuralError("full-rank flags exist only for the AI stage")
        return ops.full_rank

    # -- single-level steps ------------------------------------------------

    def single_level_forward(self, coarse_level: int, lam_fine: np.ndarray):
        """One forward step on a (B, n_fine) batch; no normalization."""
        ops = self.level_ops(coarse_level)
        lam_fine = np.ascontiguousarray(np.atleast_2d(lam_fine), dtype=np.float64)
        n_fine = len(ops.keep_idx) + len(ops.det_idx)
        if lam_fine.shape[1] != n_fine:
            raise StructuralError(
                f"expected {n_fine} fine values at level {coarse_level + 1}, "
                f"got {lam_fine.shape[1]}")
        if self.options.stage == Stage.LAZY:
            return (np.ascontiguousarray(lam_fine[:, ops.keep_idx]),
                    np.ascontiguousarray(lam_fine[:, ops.det_idx]))
        lam_c, gam = kernels.haar_forward_level(lam_fine, ops)
        if ops.p2 is not None and gam.shape[1]:
            gam = gam - (ops.p2 @ lam_c.T).T
        return lam_c, gam

    def single_level_inverse(self, coarse_level: int, lam_c, gam):
        ops = self.level_ops(coarse_level)
        lam_c = np.ascontiguousarray(np.atleast_2d(lam_c), dtype=np.float64)
        gam = np.ascontiguousarray(np.atleast_2d(gam), dtype=np.float64)
        if lam_c.shape[1] != len(ops.keep_idx) or gam.shape[1] != len(ops.det_idx):
            raise StructuralError("coefficient blocks do not match the level layout")
        if self.options.stage == Stage.LAZY:
            lam_f = np.empty((lam_c.shape[0], len(ops.keep_idx) + len(ops.det_idx)))
            lam_f[:, ops.keep_idx] = lam_c
            lam_f[:, ops.det_idx] = gam
            return lam_f
        if ops.p2 is not None and gam.shape[1]:
            gam = gam + (ops.p2 @ lam_c.T).T
        return kernels.haar_inverse_level(lam_c, np.ascontiguousarray(gam), ops)

    # -- multilevel drivers -------------------------------------------------

    def forward_array(self, values, capture_levels=None) -> np.ndarray:
        """Transform a (B, V) batch into flat (B, total) coefficient rows.

        If ``capture_levels`` is a list, the intermediate approximation
        vectors (before normalization) are appended to it, finest first.
        """
        h = self.hierarchy
        arr = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
        if arr.shape[1] != len(h.domain):
            raise StructuralError("volume does not match the hierarchy's domain")
        out = np.empty((arr.shape[0], self.layout.total))
        lam = arr
        if capture_levels is not None:
            capture_levels.append(lam)
        for c in range(h.levels - 1, self.top_level - 1, -1):
            lam, gam = self.single_level_forward(c, lam)
            out[:, self.layout.detail_slice(c)] = gam
            if capture_levels is not None:
                capture_levels.append(lam)
        out[:, self.layout.approx_slice] = lam
        if self.options.normalize:
            out *= self.norm_vector()
        return out

    def inverse_array(self, flat) -> np.ndarray:
        arr = np.ascontiguousarray(np.atleast_2d(flat), dtype=np.float64)
        if arr.shape[1] != self.layout.total:
            raise StructuralError("coefficient rows do not match the transform layout")
        if self.options.normalize:
            arr = arr / self.norm_vector()
        lam = np.ascontiguousarray(arr[:, self.layout.approx_slice])
        for c in range(self.top_level, self.hierarchy.levels):
            gam = arr[:, self.layout.detail_slice(c)]
            lam = self.single_level_inverse(c, lam, gam)
        return lam

    def forward(self, volume: Volume) -> CoefficientPyramid:
        self._check_domain(volume.domain)
        flat = self.forward_array(volume.values[None, :])[0]
        return CoefficientPyramid(self.hierarchy, self.top_level,
                                  self.options.stage, self.options.normalize, flat)

    def inverse(self, pyramid: CoefficientPyramid) -> Volume:
        self._check_pyramid(pyramid)
        values = self.inverse_array(pyramid.data[None, :])[0]
        return Volume(self.hierarchy.domain, values)

    def forward_series(self, series: VolumeSeries) -> np.ndarray:
        self._check_domain(series.domain)
        return self.forward_array(series.values)

    def pyramid_from_flat(self, flat) -> CoefficientPyramid:
        return CoefficientPyramid(self.hierarchy, self.top_level,
                                  self.options.stage, self.options.normalize,
                                  np.asarray(flat, dtype=np.float64))

    def _check_domain(self, domain):
        h_dom = self.hierarchy.domain
        if domain is not h_dom and domain != h_dom:
            raise StructuralError("volume domain does not match the hierarchy domain")

    def _check_pyramid(self, pyr: CoefficientPyramid):
        if pyr.hierarchy is not self.hierarchy:
            if hierarchy_hash(pyr.hierarchy) != hierarchy_hash(self.hierarchy):
                raise StructuralError("pyramid belongs to a different hierarchy")
        if pyr.top_level != self.top_level or pyr.stage != self.options.stage:
            raise StructuralError("pyramid options do not match the transform")
        if pyr.normalized != self.options.normalize:
            raise StructuralError("pyramid normalization flag does not match")

    # -- explicit operators (verification and normalization support) --------

    def p1_matrix(self, coarse_level: int) -> sp.csr_matrix:
        ops = self.level_ops(coarse_level)
        nm, nc = len(ops.det_idx), len(ops.keep_idx)
        return sp.csr_matrix((np.ones(nm), ops.det_km, np.arange(nm + 1)),
                             shape=(nm, nc))

    def update_matrix(self, coarse_level: int) -> sp.csr_matrix:
        ops = self.level_ops(coarse_level)
        inv_mu = sp.diags(1.0 / ops.mu_c)
        return (inv_mu @ ops.u_raw).tocsr()

    def p2_matrix(self, coarse_level: int) -> sp.csr_matrix:
        ops = self.level_ops(coarse_level)
        if ops.p2 is None:
            raise StructuralError("the polynomial predictor exists only for the AI stage")
        return ops.p2

    def level_matrices(self, coarse_level: int):
        """Analysis/synthesis operator quadruple (Ht, Gt, Hs, Gs) at one level.

        Built directly from the cached step structure; the probing route in
        voxwave.filters cross-checks these against the production transform.
        """
        key = coarse_level
        if key in self._matrices:
            return self._matrices[key]
        ops = self.level_ops(coarse_level)
        nc, nm = len(ops.keep_idx), len(ops.det_idx)
        nf = nc + nm
        sel_k = _selection(ops.keep_idx, nf)
        sel_m = _selection(ops.det_idx, nf)
        stage = self.options.stage
        if stage == Stage.LAZY:
            quad = (sel_k, sel_m, sel_k.T.tocsr(), sel_m.T.tocsr())
        else:
            p1 = self.p1_matrix(coarse_level)
            u = self.update_matrix(coarse_level)
            gt = (sel_m - p1 @ sel_k).tocsr()
            ht = (sel_k + u @ gt).tocsr()
            hs = (sel_k.T + sel_m.T @ p1).tocsr()
            eye_m = sp.identity(nm, format="csr")
            gs = (-(sel_k.T @ u) + sel_m.T @ (eye_m - p1 @ u)).tocsr()
            if stage == Stage.AI:
                p2 = ops.p2
                gt = (gt - p2 @ ht).tocsr()
                hs = (hs + gs @ p2).tocsr()
            quad = (ht, gt, hs, gs)
        self._matrices[key] = quad
        return quad

    def synthesis_matrix(self) -> sp.csr_matrix:
        """Composed synthesis operator: flat coefficients -> finest values.

        Columns are the synthesized (unnormalized) basis functions.
        """
        if self._synthesis is None:
            n = self.hierarchy.levels
            hs = {c: self.level_matrices(c)[2] for c in range(self.top_level, n)}
            gs = {c: self.level_matrices(c)[3] for c in range(self.top_level, n)}
            block = hs[self.top_level]
            for f in range(self.top_level + 1, n):
                block = hs[f] @ block
            blocks = [block]
            for c in range(self.top_level, n):
                b = gs[c]
                for f in range(c + 1, n):
                    b = hs[f] @ b
                blocks.append(b)
            self._synthesis = sp.hstack(blocks, format="csr")
        return self._synthesis

    def analysis_matrix(self) -> sp.csr_matrix:
        """Composed analysis operator: finest values -> flat coefficients."""
        n = self.hierarchy.levels
        ht = {c: self.level_matrices(c)[0] for c in range(self.top_level, n)}
        gt = {c: self.level_matrices(c)[1] for c in range(self.top_level, n)}
        prefix = {n: sp.identity(len(self.hierarchy.domain), format="csr")}
        for c in range(n - 1, self.top_level - 1, -1):
            prefix[c] = (ht[c] @ prefix[c + 1]).tocsr()
        rows = [prefix[self.top_level]]
        for c in range(self.top_level, n):
            rows.append((gt[c] @ prefix[c + 1]).tocsr())
        return sp.vstack(rows, format="csr")

    def norm_vector(self) -> np.ndarray:
        """Weighted L2 norms of every synthesized basis function."""
        if self._norms is None:
            s = self.synthesis_matrix()
            sq = s.copy()
            sq.data = sq.data**2
            norms = np.sqrt(sq.T @ self.hierarchy.domain.measure)
            self._norms = np.asarray(norms).ravel()
        return self._norms

    def abs_synthesis_matrix(self) -> sp.csr_matrix:
        """Synthesis with absolute-valued entries (of the effective basis)."""
        s = self.synthesis_matrix()
        out = s.copy()
        out.data = np.abs(out.data)
        if self.options.normalize:
            out = (out @ sp.diags(1.0 / self.norm_vector())).tocsr()
        return out


def conservation_trace(transform: Transform, volume: Volume) -> np.ndarray:
    """Measure-weighted coefficient sums at every level, finest first."""
    captured: list[np.ndarray] = []
    transform.forward_array(volume.values[None, :], capture_levels=captured)
    h = transform.hierarchy
    sums = []
    for i, lam in enumerate(captured):
        level = h.levels - i
        sums.append(float(np.sum(lam[0] * h.measures[level])))
    return np.array(sums)


# -- spec-level step operations (thin wrappers over the cached structure) --


def lazy_split(transform: Transform, coarse_level: int, lam_fine):
    """Split fine values into kept and detail restrictions."""
    ops = transform.level_ops(coarse_level)
    lam_fine = np.asarray(lam_fine, dtype=np.float64)
    if lam_fine.shape != (len(ops.keep_idx) + len(ops.det_idx),):
        raise StructuralError("input is not keyed by the fine grid of this level")
    return lam_fine[ops.keep_idx], lam_fine[ops.det_idx]


def lazy_merge(transform: Transform, coarse_level: int, lam_k, gam_m):
    ops = transform.level_ops(coarse_level)
    out = np.empty(len(ops.keep_idx) + len(ops.det_idx))
    out[ops.keep_idx] = lam_k
    out[ops.det_idx] = gam_m
    return out


def predict_p1(transform: Transform, coarse_level: int, lam_k):
    """Survivor-copy prediction of every detail slot."""
    ops = transform.level_ops(coarse_level)
    lam_k = np.asarray(lam_k, dtype=np.float64)
    if lam_k.shape != (len(ops.keep_idx),):
        raise StructuralError("input is not keyed by the kept grid of this level")
    return lam_k[ops.det_km]


def update_u(transform: Transform, coarse_level: int, lam_k, gam):
    """Measure-weighted update making kept values local region averages."""
    ops = transform.level_ops(coarse_level)
    lam_k = np.asarray(lam_k, dtype=np.float64)
    gam = np.asarray(gam, dtype=np.float64)
    upd = ops.u_raw @ gam
    return lam_k + upd / ops.mu_c


def predict_p2(transform: Transform, coarse_level: int, lam):
    """Average-interpolating prediction of every detail slot."""
    ops = transform.level_ops(coarse_level)
    if ops.p2 is None:
        raise StructuralError("the polynomial predictor exists only for the AI stage")
    return ops.p2 @ np.asarray(lam, dtype=np.float64)


# -- basis-function synthesis ----------------------------------------------

_PRIMAL_KINDS = ("scaling", "wavelet")
_DUAL_KINDS = ("dual-scaling", "dual-wavelet")


def synthesize_basis_function(transform: Transform, level: int, index: int,
                              kind: str) -> Volume:
    """Materialize one basis function as a volume of finest-voxel values.

    Primal functions are synthesized by inverting a unit coefficient; dual
    functions by propagating a unit slot through the transposed analysis
    steps and dividing by the voxel measures.  With ``normalize`` set on
    the transform, primal functions come out unit-norm and duals are
    scaled inversely.
    """
    h = transform.hierarchy
    n = h.levels
    j0 = transform.top_level
    if kind not in _PRIMAL_KINDS + _DUAL_KINDS:
        raise ValueError(f"unknown basis kind {kind!r}")
    scaling_like = kind in ("scaling", "dual-scaling")
    lo, hi = (j0, n) if scaling_like else (j0, n - 1)
    if not lo <= level <= hi:
        raise ValueError(f"level {level} out of range [{lo}, {hi}] for {kind}")
    size = h.n_members(level) if scaling_like else h.n_details(level)
    if not 0 <= index < size:
        raise ValueError(f"index {index} out of range for {kind} at level {level}")

    e = np.zeros(size)
    e[index] = 1.0

    # Primal counterpart is always synthesized: it carries the norm that
    # the normalization option attaches to this slot.
    if scaling_like:
        primal = e
        start = level
    else:
        primal = transform.level_matrices(level)[3] @ e
        start = level + 1
    for f in range(start, n):
        primal = transform.level_matrices(f)[2] @ primal
    primal = np.asarray(primal).ravel()

    if kind in _PRIMAL_KINDS:
        v = primal
    elif kind == "dual-scaling":
        v = e
        for f in range(level, n):
            v = transform.level_matrices(f)[0].T @ v
        v = np.asarray(v).ravel() / h.domain.measure
    else:
        v = transform.level_matrices(level)[1].T @ e
        for f in range(level + 1, n):
            v = transform.level_matrices(f)[0].T @ v
        v = np.asarray(v).ravel() / h.domain.measure

    if transform.options.normalize:
        norm = float(np.sqrt(np.sum(primal**2 * h.domain.measure)))
        v = v / norm if kind in _PRIMAL_KINDS else v * norm
    return Volume(h.domain, v)


# -- PYR1 serialization ----------------------------------------------------


def save_pyramid(pyr: CoefficientPyramid, path) -> None:
    with open(path, "wb") as f:
        f.write(b"PYR1\n")
        f.write(f"hierarchy {hierarchy_hash(pyr.hierarchy)}\n".encode())
        f.write(f"top_level {pyr.top_level}\n".encode())
        f.write(f"stage {pyr.stage.value}\n".encode())
        f.write(f"normalized {int(pyr.normalized)}\n".encode())
        f.write(f"count {pyr.layout.total}\n".encode())
        f.write(b"data\n")
        f.write(pyr.data.astype("<f8").tobytes())


def load_pyramid(path, transform: Transform) -> CoefficientPyramid:
    with open(path, "rb") as f:
        lines = [f.readline().decode("ascii", errors="replace").strip()
                 for _ in range(7)]
        payload = f.read()
    if lines[0] != "PYR1":
        raise VolumeFormatError("not a PYR1 file")
    fields = {}
    for ln in lines[1:6]:
        key, _, val = ln.partition(" ")
        fields[key] = val
    if lines[6] != "data":
        raise VolumeFormatError("expected 'data' line in PYR1 header")
    if fields.get("hierarchy") != hierarchy_hash(transform.hierarchy):
        raise StructuralError("pyramid was produced on a different hierarchy")
    if int(fields["top_level"]) != transform.top_level:
        raise StructuralError("pyramid top level does not match the transform")
    if fields["stage"] != transform.options.stage.value:
        raise StructuralError("pyramid stage does not match the transform")
    if bool(int(fields["normalized"])) != transform.options.normalize:
        raise StructuralError("pyramid normalization does not match the transform")
    count = int(fields["count"])
    data = np.frombuffer(payload, dtype="<f8")
    if data.shape != (count,):
        raise VolumeFormatError(
            f"payload has {data.shape[0]} values, header promises {count}")
    return CoefficientPyramid(transform.hierarchy, transform.top_level,
                              transform.options.stage, transform.options.normalize,
                              data.copy())
