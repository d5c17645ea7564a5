"""Discrete voxel domains, volumes on them, and the VXL1 volume format.

A domain is an arbitrary finite subset of the integer grid (2D domains are
embedded with ``n_z = 0``).  Every voxel carries a strictly positive measure
(1.0 unless a weight volume overrides it) and represents the axis-aligned
cell centred at ``coord * spacing``.  Two voxels are neighbors when their
cells share a face, i.e. when the L1 distance of their integer coordinates
is exactly 1.
"""
from __future__ import annotations

import numpy as np

from .errors import StructuralError, VolumeFormatError

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

_AXIS_STEPS = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int64)


def are_neighbors(a, b) -> bool:
    """True iff the two integer coordinate triples are face-adjacent."""
    ax, ay, az = a
    bx, by, bz = b
    return abs(ax - bx) + abs(ay - by) + abs(az - bz) == 1


def _as_coord_array(coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) coordinate array, got shape {arr.shape}")
    if arr.size and (arr.min() < INT32_MIN or arr.max() > INT32_MAX):
        raise ValueError("voxel coordinates must fit in signed 32-bit range")
    return arr


class DiscreteDomain:
    """Finite set of voxels with per-voxel measures and a neighbor graph.

    Voxels are kept in lexicographic order (z, then y, then x), which is
    also the VXL1 payload order; all per-voxel arrays in the package are
    aligned with this ordering.  Instances are immutable after construction
    and safe to share between workers.
    """

    def __init__(self, coords, spacing=(1.0, 1.0, 1.0), measure=None, dim=None):
        coords = _as_coord_array(coords)
        if coords.shape[0] == 0:
            raise ValueError("a domain must contain at least one voxel")
        order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2]))
        coords = np.ascontiguousarray(coords[order])
        keys = self._encode(coords)
        if np.any(np.diff(keys) == 0):
            raise ValueError("duplicate voxel coordinates in domain")

        spacing = np.asarray(spacing, dtype=np.float64)
        if spacing.shape != (3,) or np.any(spacing <= 0):
            raise ValueError("spacing must be three positive reals")

        if measure is None:
            measure = np.ones(coords.shape[0], dtype=np.float64)
        else:
            measure = np.asarray(measure, dtype=np.float64)[order]
            if measure.shape != (coords.shape[0],):
                raise ValueError("measure array must have one entry per voxel")
            if np.any(~np.isfinite(measure)) or np.any(measure <= 0):
                raise ValueError("every voxel measure must be strictly positive")

        if dim is None:
            dim = 2 if np.all(coords[:, 2] == 0) else 3
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if dim == 2:
            if np.any(coords[:, 2] != 0):
                raise ValueError("2D domains must have n_z = 0 everywhere")
            if spacing[2] != 1.0:
                raise ValueError("2D domains must have d_z = 1")

        self.coords = coords
        self.spacing = spacing
        self.measure = measure
        self.dim = int(dim)
        self._keys = keys
        self._adjacency = None
        self.coords.setflags(write=False)
        self.measure.setflags(write=False)
        self.spacing.setflags(write=False)

    # -- basic queries ----------------------------------------------------

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.coords.shape[0]

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    def _encode(self, coords) -> np.ndarray:
        # Bijective packing of (x, y, z) into one int64 sort key with the
        # same (z, y, x) lexicographic order as the voxel ordering.
        c = np.asarray(coords, dtype=np.int64)
        span = np.int64(2**21)
        off = np.int64(2**20)
        return ((c[:, 2] + off) * span + (c[:, 1] + off)) * span + (c[:, 0] + off)

    def positions_of(self, coords) -> np.ndarray:
        """Positions of the given coordinates in the voxel ordering.

        Raises StructuralError if any coordinate is not in the domain.
        """
        keys = self._encode(_as_coord_array(coords))
        pos = np.searchsorted(self._keys, keys)
        pos_clipped = np.minimum(pos, len(self._keys) - 1)
        if np.any(self._keys[pos_clipped] != keys):
            raise StructuralError("coordinate not contained in domain")
        return pos_clipped

    def contains(self, coords) -> np.ndarray:
        keys = self._encode(_as_coord_array(coords))
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == keys

    def physical_positions(self) -> np.ndarray:
        """Voxel centres in physical units, shape (n, 3)."""
        return self.coords.astype(np.float64) * self.spacing

    # -- neighbor graph ---------------------------------------------------

    def adjacency(self):
        """Face-adjacency as a CSR pair (indptr, indices) over positions."""
        if self._adjacency is None:
            edges = self.neighbor_pairs()
            n = len(self)
            both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
            if len(both):
                order = np.lexsort((both[:, 1], both[:, 0]))
                both = both[order]
                indptr = np.zeros(n + 1, dtype=np.int64)
                np.add.at(indptr, both[:, 0] + 1, 1)
                np.cumsum(indptr, out=indptr)
                indices = np.ascontiguousarray(both[:, 1])
            else:
                indptr = np.zeros(n + 1, dtype=np.int64)
                indices = np.zeros(0, dtype=np.int64)
            self._adjacency = (indptr, indices)
        return self._adjacency

    def neighbor_pairs(self) -> np.ndarray:
        """All face-adjacent position pairs (i, j) with i < j, shape (e, 2)."""
        pairs = []
        for step in _AXIS_STEPS:
            shifted = self.coords + step
            keys = self._encode(shifted)
            pos = np.searchsorted(self._keys, keys)
            pos_c = np.minimum(pos, len(self._keys) - 1)
            hit = self._keys[pos_c] == keys
            if np.any(hit):
                src = np.flatnonzero(hit)
                pairs.append(np.column_stack([src, pos_c[hit]]))
        if not pairs:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.concatenate(pairs)
        return np.sort(e, axis=1)

    def neighbors_of(self, position: int) -> np.ndarray:
        indptr, indices = self.adjacency()
        return indices[indptr[position] : indptr[position + 1]]

    def connected_components(self) -> list[np.ndarray]:
        """Connected components of the neighbor graph, as position arrays.

        Components are ordered by their smallest member position.
        """
        indptr, indices = self.adjacency()
        n = len(self)
        label = np.full(n, -1, dtype=np.int64)
        comps = []
        for start in range(n):
            if label[start] >= 0:
                continue
            stack = [start]
            label[start] = len(comps)
            members = [start]
            while stack:
                v = stack.pop()
                for w in indices[indptr[v] : indptr[v + 1]]:
                    if label[w] < 0:
                        label[w] = len(comps)
                        members.append(int(w))
                        stack.append(int(w))
            comps.append(np.sort(np.array(members, dtype=np.int64)))
        return comps

    def __eq__(self, other):
        if not isinstance(other, DiscreteDomain):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.spacing, other.spacing)
            and np.array_equal(self.measure, other.measure)
        )

    def __repr__(self):
        return f"DiscreteDomain(n={len(self)}, dim={self.dim})"


class Volume:
    """Real values, one per domain voxel, aligned with the voxel ordering."""

    def __init__(self, domain: DiscreteDomain, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (len(domain),):
            raise StructuralError(
                f"volume has {values.shape} values for a domain of {len(domain)} voxels"
            )
        self.domain = domain
        self.values = values
        self.values.setflags(write=False)

    def norm(self) -> float:
        """L2 norm weighted by the voxel measures."""
        return float(np.sqrt(np.sum(self.values**2 * self.domain.measure)))

    def restrict_to(self, domain: DiscreteDomain) -> "Volume":
        pos = self.domain.positions_of(domain.coords)
        return Volume(domain, self.values[pos])

    def __repr__(self):
        return f"Volume(n={len(self.domain)})"


class VolumeSeries:
    """A time series of volumes on one domain; values has shape (nt, n)."""

    def __init__(self, domain: DiscreteDomain, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(domain):
            raise StructuralError(
                f"series shape {values.shape} does not match domain of {len(domain)}"
            )
        self.domain = domain
        self.values = values

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    def volume(self, t: int) -> Volume:
        return Volume(self.domain, self.values[t])

    def restrict_to(self, domain: DiscreteDomain) -> "VolumeSeries":
        pos = self.domain.positions_of(domain.coords)
        return VolumeSeries(domain, self.values[:, pos])


def full_box_domain(nx, ny, nz=1, spacing=(1.0, 1.0, 1.0)) -> DiscreteDomain:
    """Domain covering the whole (nx, ny, nz) grid."""
    zz, yy, xx = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    coords = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    return DiscreteDomain(coords, spacing=spacing)


def make_ring_domain(radii, grid_size: int, spacing=(1.0, 1.0, 1.0)) -> DiscreteDomain:
    """2D domain of concentric annuli on a grid_size x grid_size grid.

    ``radii`` is a list of (inner, outer) pairs in grid units, strictly
    increasing and pairwise disjoint.  A pixel belongs to the domain when
    its centre's distance r to the grid centre satisfies inner <= r < outer
    for some annulus.
    """
    radii = [(float(a), float(b)) for a, b in radii]
    if not radii:
        raise ValueError("at least one (inner, outer) annulus is required")
    prev_outer = None
    for inner, outer in radii:
        if inner < 0 or outer <= inner:
            raise ValueError(f"invalid annulus ({inner}, {outer})")
        if prev_outer is not None and inner < prev_outer:
            raise ValueError("annuli must be disjoint and increasing")
        prev_outer = outer
    if grid_size < 1:
        raise ValueError("grid_size must be positive")
    half_diag = (grid_size - 1) / 2.0 * np.sqrt(2.0)
    if radii[-1][1] > half_diag + grid_size:
        raise ValueError("outermost radius far exceeds the grid")

    c = (grid_size - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(grid_size), np.arange(grid_size), indexing="ij")
    r = np.hypot(xx - c, yy - c)
    mask = np.zeros_like(r, dtype=bool)
    for inner, outer in radii:
        mask |= (r >= inner) & (r < outer)
    if not mask.any():
        raise ValueError("the requested annuli contain no pixel centres")
    ys, xs = np.nonzero(mask)
    coords = np.column_stack([xs, ys, np.zeros_like(xs)])
    return DiscreteDomain(coords, spacing=spacing)


# -- VXL1 file format ---------------------------------------------------
#
# Line-oriented text header followed by a raw little-endian payload:
#   VXL1
#   dims nx ny nz [nt]
#   spacing dx dy dz
#   dtype u8|f64
#   data
#   <payload, x fastest, then y, then z, then t>
# Masks use u8 (nonzero = in domain); value volumes use f64.


def _read_header_line(f, what):
    line = f.readline()
    if not line:
        raise VolumeFormatError(f"unexpected end of file while reading {what}")
    return line.decode("ascii", errors="replace").strip()


def load_volume(path):
    """Load a VXL1 file.

    Returns a DiscreteDomain for u8 masks, a Volume for 3D f64 data, or a
    VolumeSeries for 4D f64 data.  f64 volumes are returned on the full box
    domain; restrict with ``Volume.restrict_to`` when a mask applies.
    """
    with open(path, "rb") as f:
        magic = _read_header_line(f, "magic")
        if magic != "VXL1":
            raise VolumeFormatError(f"bad magic {magic!r}, expected 'VXL1'")
        dims_line = _read_header_line(f, "dims").split()
        if len(dims_line) not in (4, 5) or dims_line[0] != "dims":
            raise VolumeFormatError(f"malformed dims line: {' '.join(dims_line)!r}")
        try:
            dims = [int(v) for v in dims_line[1:]]
        except ValueError as exc:
            raise VolumeFormatError(f"non-integer dimension: {exc}") from None
        if any(d < 1 for d in dims):
            raise VolumeFormatError("dimensions must be positive")
        nx, ny, nz = dims[:3]
        nt = dims[3] if len(dims) == 4 else None

        sp_line = _read_header_line(f, "spacing").split()
        if len(sp_line) != 4 or sp_line[0] != "spacing":
            raise VolumeFormatError(f"malformed spacing line: {' '.join(sp_line)!r}")
        try:
            spacing = tuple(float(v) for v in sp_line[1:])
        except ValueError as exc:
            raise VolumeFormatError(f"bad spacing value: {exc}") from None
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise VolumeFormatError("spacing entries must be positive and finite")

        dt_line = _read_header_line(f, "dtype").split()
        if len(dt_line) != 2 or dt_line[0] != "dtype" or dt_line[1] not in ("u8", "f64"):
            raise VolumeFormatError(f"malformed dtype line: {' '.join(dt_line)!r}")
        dtype = dt_line[1]

        data_line = _read_header_line(f, "data marker")
        if data_line != "data":
            raise VolumeFormatError(f"expected 'data' line, got {data_line!r}")

        count = nx * ny * nz * (nt or 1)
        itemsize = 1 if dtype == "u8" else 8
        payload = f.read(count * itemsize + 1)
        if len(payload) < count * itemsize:
            raise VolumeFormatError(
                f"truncated payload: expected {count * itemsize} bytes, got {len(payload)}"
            )
        if len(payload) > count * itemsize:
            raise VolumeFormatError("trailing bytes after payload")

    if dtype == "u8":
        if nt is not None:
            raise VolumeFormatError("u8 masks cannot carry a time axis")
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(nz, ny, nx)
        zz, yy, xx = np.nonzero(raw)
        if len(xx) == 0:
            raise VolumeFormatError("mask selects no voxels")
        coords = np.column_stack([xx, yy, zz])
        return DiscreteDomain(coords, spacing=spacing)

    raw = np.frombuffer(payload, dtype="<f8")
    if np.any(~np.isfinite(raw)):
        raise VolumeFormatError("payload contains non-finite values")
    box = full_box_domain(nx, ny, nz, spacing=spacing)
    if nt is None:
        return Volume(box, raw.copy())
    return VolumeSeries(box, raw.reshape(nt, nz * ny * nx).copy())


def _box_dims(domain: DiscreteDomain):
    if domain.coords.min() < 0:
        raise ValueError("VXL1 files index the grid from 0; domain has negative coords")
    return tuple(int(m) + 1 for m in domain.coords.max(axis=0))


def _write_header(f, dims, spacing, dtype, nt=None):
    f.write(b"VXL1\n")
    dim_tokens = " ".join(str(d) for d in dims) + (f" {nt}" if nt is not None else "")
    f.write(f"dims {dim_tokens}\n".encode("ascii"))
    f.write(("spacing " + " ".join(repr(float(s)) for s in spacing) + "\n").encode("ascii"))
    f.write(f"dtype {dtype}\n".encode("ascii"))
    f.write(b"data\n")


def save_mask(domain: DiscreteDomain, path) -> None:
    """Write the domain as a u8 VXL1 mask on its bounding box."""
    nx, ny, nz = _box_dims(domain)
    grid = np.zeros((nz, ny, nx), dtype=np.uint8)
    c = domain.coords
    grid[c[:, 2], c[:, 1], c[:, 0]] = 1
    with open(path, "wb") as f:
        _write_header(f, (nx, ny, nz), domain.spacing, "u8")
        f.write(grid.tobytes())


def save_volume(vol, path, fill=0.0) -> None:
    """Write a Volume or VolumeSeries as an f64 VXL1 file.

    Values are embedded in the domain's bounding box; off-domain cells get
    ``fill``.
    """
    domain = vol.domain
    nx, ny, nz = _box_dims(domain)
    c = domain.coords
    if isinstance(vol, VolumeSeries):
        grid = np.full((vol.n_times, nz, ny, nx), fill, dtype="<f8")
        grid[:, c[:, 2], c[:, 1], c[:, 0]] = vol.values
        with open(path, "wb") as f:
            _write_header(f, (nx, ny, nz), domain.spacing, "f64", nt=vol.n_times)
            f.write(grid.tobytes())
    else:
        grid = np.full((nz, ny, nx), fill, dtype="<f8")
        grid[c[:, 2], c[:, 1], c[:, 0]] = vol.values
        with open(path, "wb") as f:
            _write_header(f, (nx, ny, nz), domain.spacing, "f64")
            f.write(grid.tobytes())
