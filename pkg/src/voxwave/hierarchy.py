"""Nested random-merge hierarchies over a discrete domain.

Levels run from N (every voxel is its own region) down to 0.  Each
coarsening step groups members with up to ``max_merge`` of their available
neighbors: the initiating member survives to the coarser grid, the selected
neighbors become detail slots, and the merged region is the union of the
group's regions.  Selection is seeded and fully deterministic: members are
visited in a random permutation, the group size is drawn uniformly from
{1..min(p, available)}, and neighbors are drawn sequentially without
replacement with probability inversely proportional to centroid distance.
"""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .domain import DiscreteDomain
from .errors import StructuralError, VolumeFormatError

DISTANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class LevelMerge:
    """Combinatorics of one coarsening step from level c+1 to level c.

    All index arrays refer to positions within the member ordering of the
    two levels involved (fine = c+1, coarse = c).
    """

    group: np.ndarray       # (n_fine,) group id of each fine member
    keep_idx: np.ndarray    # (n_coarse,) fine index of each group's survivor
    det_idx: np.ndarray     # (n_det,) fine indices of non-survivors, ascending
    det_km: np.ndarray      # (n_det,) coarse (group) id of each detail slot
    group_ptr: np.ndarray   # (n_coarse+1,) CSR offsets of details per group
    group_det: np.ndarray   # (n_det,) detail slots per group, ascending

    @property
    def n_coarse(self) -> int:
        return len(self.keep_idx)

    @property
    def n_detail(self) -> int:
        return len(self.det_idx)


class GridHierarchy:
    """Nested index sets, sibling groups, merged regions and neighbor maps."""

    def __init__(self, domain, seed, max_merge, members, merges, measures,
                 centroids, adjacency, finest_label):
        self.domain = domain
        self.seed = int(seed)
        self.max_merge = int(max_merge)
        self.members = members          # list over levels 0..N of finest positions
        self.merges = merges            # merges[c]: step from level c+1 to c
        self.measures = measures        # per level: region measures
        self.centroids = centroids      # per level: (n_j, 3) physical centroids
        self.adjacency = adjacency      # per level: (indptr, indices) CSR
        self.finest_label = finest_label  # per level: (V,) region label per voxel

    @property
    def levels(self) -> int:
        return len(self.members) - 1

    def n_members(self, level: int) -> int:
        return len(self.members[level])

    def n_details(self, coarse_level: int) -> int:
        return self.merges[coarse_level].n_detail

    def region_voxels(self, level: int, k: int) -> np.ndarray:
        """Finest-voxel positions of region k at the given level."""
        return np.flatnonzero(self.finest_label[level] == k)

    def neighbors(self, level: int, k: int) -> np.ndarray:
        indptr, indices = self.adjacency[level]
        return indices[indptr[k] : indptr[k + 1]]

    def sibling_groups(self, coarse_level: int) -> list[np.ndarray]:
        """Groups of fine-member indices merged to form the coarse level."""
        m = self.merges[coarse_level]
        out = []
        for g in range(m.n_coarse):
            dets = m.det_idx[m.group_det[m.group_ptr[g] : m.group_ptr[g + 1]]]
            out.append(np.concatenate([[m.keep_idx[g]], dets]))
        return out

    def __repr__(self):
        counts = [len(m) for m in self.members]
        return f"GridHierarchy(levels={self.levels}, members={counts}, seed={self.seed})"


def _weighted_sample_without_replacement(rng, candidates, weights, q):
    chosen = []
    cand = list(candidates)
    w = list(weights)
    for _ in range(q):
        total = sum(w)
        u = rng.random() * total
        acc = 0.0
        pick = len(cand) - 1
        for i, wi in enumerate(w):
            acc += wi
            if u < acc:
                pick = i
                break
        chosen.append(cand.pop(pick))
        w.pop(pick)
    return chosen


def build_hierarchy(domain: DiscreteDomain, levels: int, seed: int,
                    max_merge: int = 3) -> GridHierarchy:
    """Build an N-level hierarchy with the seeded random merging process."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if max_merge < 1:
        raise ValueError("max_merge must be >= 1")
    if len(domain) == 0:
        raise ValueError("domain must be non-empty")

    n_total = len(domain)
    rng = np.random.default_rng(np.uint64(np.int64(seed).view(np.uint64)))

    members = [None] * (levels + 1)
    merges = [None] * levels
    measures = [None] * (levels + 1)
    centroids = [None] * (levels + 1)
    adjacency = [None] * (levels + 1)
    finest_label = [None] * (levels + 1)

    members[levels] = np.arange(n_total, dtype=np.int64)
    measures[levels] = domain.measure.copy()
    centroids[levels] = domain.physical_positions()
    adjacency[levels] = domain.adjacency()
    finest_label[levels] = np.arange(n_total, dtype=np.int64)

    for c in range(levels - 1, -1, -1):
        f = c + 1
        n_fine = len(members[f])
        indptr, indices = adjacency[f]
        cent = centroids[f]

        order = rng.permutation(n_fine)
        available = np.ones(n_fine, dtype=bool)
        survivors = []
        group_members = []
        for idx in order:
            if not available[idx]:
                continue
            available[idx] = False
            nbrs = indices[indptr[idx] : indptr[idx + 1]]
            cand = [int(n) for n in nbrs if available[n]]
            sel = []
            if cand:
                q = int(rng.integers(1, min(max_merge, len(cand)) + 1))
                d = np.sqrt(np.sum((cent[cand] - cent[idx]) ** 2, axis=1))
                w = 1.0 / np.maximum(d, DISTANCE_FLOOR)
                sel = _weighted_sample_without_replacement(rng, cand, w.tolist(), q)
                for s in sel:
                    available[s] = False
            survivors.append(int(idx))
            group_members.append(sel)

        # Canonical coarse ordering: ascending finest representative.
        surv = np.array(survivors, dtype=np.int64)
        rank = np.argsort(np.argsort(members[f][surv]))
        n_coarse = len(surv)
        keep_idx = np.empty(n_coarse, dtype=np.int64)
        group = np.empty(n_fine, dtype=np.int64)
        for gi, (s, sel) in enumerate(zip(survivors, group_members)):
            g = rank[gi]
            keep_idx[g] = s
            group[s] = g
            for m in sel:
                group[m] = g

        det_mask = np.ones(n_fine, dtype=bool)
        det_mask[keep_idx] = False
        det_idx = np.flatnonzero(det_mask)
        det_km = group[det_idx]
        order_d = np.argsort(det_km, kind="stable")
        group_det = np.arange(len(det_idx), dtype=np.int64)[order_d]
        group_ptr = np.zeros(n_coarse + 1, dtype=np.int64)
        np.add.at(group_ptr, det_km + 1, 1)
        np.cumsum(group_ptr, out=group_ptr)

        merge = LevelMerge(group=group, keep_idx=keep_idx, det_idx=det_idx,
                           det_km=det_km, group_ptr=group_ptr, group_det=group_det)
        merges[c] = merge
        members[c] = members[f][keep_idx]

        mu_f = measures[f]
        mu_c = np.zeros(n_coarse, dtype=np.float64)
        np.add.at(mu_c, group, mu_f)
        measures[c] = mu_c

        cw = cent * mu_f[:, None]
        cen_c = np.zeros((n_coarse, 3), dtype=np.float64)
        np.add.at(cen_c, group, cw)
        centroids[c] = cen_c / mu_c[:, None]

        finest_label[c] = group[finest_label[f]]

        # Coarse neighbors: any fine edge crossing two groups.
        src = np.repeat(np.arange(n_fine, dtype=np.int64),
                        np.diff(indptr))
        dst = indices
        gs, gd = group[src], group[dst]
        cross = gs != gd
        pairs = np.column_stack([gs[cross], gd[cross]])
        if len(pairs):
            keys = pairs[:, 0] * np.int64(n_coarse) + pairs[:, 1]
            uniq = np.unique(keys)
            rows = uniq // n_coarse
            cols = uniq % n_coarse
            c_indptr = np.zeros(n_coarse + 1, dtype=np.int64)
            np.add.at(c_indptr, rows + 1, 1)
            np.cumsum(c_indptr, out=c_indptr)
            adjacency[c] = (c_indptr, cols.astype(np.int64))
        else:
            adjacency[c] = (np.zeros(n_coarse + 1, dtype=np.int64),
                            np.zeros(0, dtype=np.int64))

    return GridHierarchy(domain, seed, max_merge, members, merges, measures,
                         centroids, adjacency, finest_label)


@dataclass(frozen=True)
class LevelStats:
    level: int
    n_members: int
    mean_group_size: float
    max_group_size: int
    mean_region_measure: float


def coarsen_stats(h: GridHierarchy) -> list[LevelStats]:
    """Per-level member counts and sibling-group summaries, fine to coarse.

    The group statistics attached to level j describe the merge that
    produced it (empty at the finest level, reported as groups of one).
    """
    out = [LevelStats(h.levels, h.n_members(h.levels), 1.0, 1,
                      float(np.mean(h.measures[h.levels])))]
    for c in range(h.levels - 1, -1, -1):
        m = h.merges[c]
        sizes = np.diff(m.group_ptr) + 1
        out.append(LevelStats(c, m.n_coarse, float(np.mean(sizes)),
                              int(np.max(sizes)), float(np.mean(h.measures[c]))))
    return out


# -- HIER1 serialization --------------------------------------------------
#
# Versioned line-oriented text.  Groups are written per coarsening step as
# the survivor's finest voxel coordinates followed by the merged members',
# then the neighbor adjacency per level.  Round-trips exactly given the
# same domain.


def _coord_token(domain, pos):
    x, y, z = domain.coords[pos]
    return f"{x},{y},{z}"


def hierarchy_to_text(h: GridHierarchy) -> str:
    buf = io.StringIO()
    buf.write("HIER1\n")
    buf.write(f"seed {h.seed}\n")
    buf.write(f"max_merge {h.max_merge}\n")
    buf.write(f"levels {h.levels}\n")
    buf.write(f"voxels {len(h.domain)}\n")
    for c in range(h.levels - 1, -1, -1):
        m = h.merges[c]
        buf.write(f"level {c}\n")
        fine_members = h.members[c + 1]
        for g in range(m.n_coarse):
            surv = _coord_token(h.domain, fine_members[m.keep_idx[g]])
            dets = m.det_idx[m.group_det[m.group_ptr[g] : m.group_ptr[g + 1]]]
            toks = " ".join(_coord_token(h.domain, fine_members[d]) for d in dets)
            buf.write(f"group {surv} : {toks}\n".rstrip() + "\n")
    for level in range(h.levels, -1, -1):
        buf.write(f"neighbors {level}\n")
        indptr, indices = h.adjacency[level]
        mem = h.members[level]
        for k in range(len(mem)):
            toks = " ".join(_coord_token(h.domain, mem[n])
                            for n in indices[indptr[k] : indptr[k + 1]])
            buf.write(f"{_coord_token(h.domain, mem[k])} : {toks}\n".rstrip() + "\n")
    return buf.getvalue()


def hierarchy_hash(h: GridHierarchy) -> str:
    """Stable 16-hex-digit digest of the hierarchy structure."""
    return hashlib.sha256(hierarchy_to_text(h).encode("ascii")).hexdigest()[:16]


def save_hierarchy(h: GridHierarchy, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(hierarchy_to_text(h))


def _parse_coord(tok):
    parts = tok.split(",")
    if len(parts) != 3:
        raise VolumeFormatError(f"bad coordinate token {tok!r}")
    return tuple(int(p) for p in parts)


def load_hierarchy(path, domain: DiscreteDomain) -> GridHierarchy:
    """Rebuild a hierarchy from its HIER1 text and the original domain."""
    with open(path, encoding="ascii") as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != "HIER1":
        raise VolumeFormatError("not a HIER1 file")

    def keyval(i, key, cast=int):
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != key:
            raise VolumeFormatError(f"expected '{key} <value>' on line {i + 1}")
        return cast(parts[1])

    seed = keyval(1, "seed")
    max_merge = keyval(2, "max_merge")
    levels = keyval(3, "levels")
    n_voxels = keyval(4, "voxels")
    if n_voxels != len(domain):
        raise StructuralError("hierarchy was built on a different domain")

    groups_per_level: dict[int, list] = {}
    i = 5
    current = None
    while i < len(lines) and not lines[i].startswith("neighbors"):
        ln = lines[i]
        if ln.startswith("level "):
            current = int(ln.split()[1])
            groups_per_level[current] = []
        elif ln.startswith("group "):
            body = ln[len("group "):]
            surv_tok, _, rest = body.partition(" : ")
            dets = [_parse_coord(t) for t in rest.split()] if rest else []
            groups_per_level[current].append((_parse_coord(surv_tok.strip()), dets))
        elif ln:
            raise VolumeFormatError(f"unexpected line {i + 1}: {ln!r}")
        i += 1

    members = [None] * (levels + 1)
    merges = [None] * levels
    measures = [None] * (levels + 1)
    centroids = [None] * (levels + 1)
    adjacency = [None] * (levels + 1)
    finest_label = [None] * (levels + 1)

    n_total = len(domain)
    members[levels] = np.arange(n_total, dtype=np.int64)
    measures[levels] = domain.measure.copy()
    centroids[levels] = domain.physical_positions()
    adjacency[levels] = domain.adjacency()
    finest_label[levels] = np.arange(n_total, dtype=np.int64)

    for c in range(levels - 1, -1, -1):
        if c not in groups_per_level:
            raise VolumeFormatError(f"missing groups for level {c}")
        fine_members = members[c + 1]
        fine_pos = {int(p): i for i, p in enumerate(fine_members)}
        glist = groups_per_level[c]
        surv_positions = []
        det_lists = []
        for surv_coord, det_coords in glist:
            sp = int(domain.positions_of([surv_coord])[0])
            surv_positions.append(fine_pos[sp])
            det_lists.append([fine_pos[int(domain.positions_of([dc])[0])]
                              for dc in det_coords])

        n_fine = len(fine_members)
        surv = np.array(surv_positions, dtype=np.int64)
        order = np.argsort(fine_members[surv])
        n_coarse = len(surv)
        keep_idx = np.empty(n_coarse, dtype=np.int64)
        group = np.full(n_fine, -1, dtype=np.int64)
        for g, gi in enumerate(order):
            keep_idx[g] = surv[gi]
            group[surv[gi]] = g
            for m in det_lists[gi]:
                group[m] = g
        if np.any(group < 0):
            raise VolumeFormatError(f"groups at level {c} do not partition the grid")

        det_mask = np.ones(n_fine, dtype=bool)
        det_mask[keep_idx] = False
        det_idx = np.flatnonzero(det_mask)
        det_km = group[det_idx]
        order_d = np.argsort(det_km, kind="stable")
        group_det = np.arange(len(det_idx), dtype=np.int64)[order_d]
        group_ptr = np.zeros(n_coarse + 1, dtype=np.int64)
        np.add.at(group_ptr, det_km + 1, 1)
        np.cumsum(group_ptr, out=group_ptr)

        merges[c] = LevelMerge(group=group, keep_idx=keep_idx, det_idx=det_idx,
                               det_km=det_km, group_ptr=group_ptr, group_det=group_det)
        members[c] = fine_members[keep_idx]

        mu_f = measures[c + 1]
        mu_c = np.zeros(n_coarse, dtype=np.float64)
        np.add.at(mu_c, group, mu_f)
        measures[c] = mu_c
        cw = centroids[c + 1] * mu_f[:, None]
        cen_c = np.zeros((n_coarse, 3), dtype=np.float64)
        np.add.at(cen_c, group, cw)
        centroids[c] = cen_c / mu_c[:, None]
        finest_label[c] = group[finest_label[c + 1]]

        indptr, indices = adjacency[c + 1]
        src = np.repeat(np.arange(n_fine, dtype=np.int64), np.diff(indptr))
        gs, gd = group[src], group[indices]
        cross = gs != gd
        if np.any(cross):
            keys = np.unique(gs[cross] * np.int64(n_coarse) + gd[cross])
            rows, cols = keys // n_coarse, keys % n_coarse
            c_indptr = np.zeros(n_coarse + 1, dtype=np.int64)
            np.add.at(c_indptr, rows + 1, 1)
            np.cumsum(c_indptr, out=c_indptr)
            adjacency[c] = (c_indptr, cols.astype(np.int64))
        else:
            adjacency[c] = (np.zeros(n_coarse + 1, dtype=np.int64),
                            np.zeros(0, dtype=np.int64))

    return GridHierarchy(domain, seed, max_merge, members, merges, measures,
                         centroids, adjacency, finest_label)
