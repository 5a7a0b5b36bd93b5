"""Tensor-product meshes for cylinders, half-cylinders, and cross-sections.

Domains are axis-aligned products of intervals.  The first ``n_axial``
axes are the elongated directions (length set by ``ell``); the remaining
axes span the cross-section ``omega``.  Boundary nodes carry exactly one
tag: Dirichlet (eliminated) or free (natural/Neumann condition).
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import BadResolution, MemoryBudget, MeshMismatch, NoReflectionSymmetry

DOMAIN_KINDS = (
    "full-cylinder",
    "half-plus",
    "half-minus",
    "cross-section",
    "multi-direction",
)

DEFAULT_NODE_CAP = 2_000_000

_EPS = 1e-12


class TensorMesh:
    """Immutable tensor-product grid with boundary tags.

    Attributes
    ----------
    domain_kind : one of DOMAIN_KINDS
    axis_partitions : tuple of strictly increasing coordinate arrays
    n_axial : number of elongated axes (0 for a cross-section)
    ell : half-length of the elongated axes (None for a cross-section)
    """

    def __init__(self, domain_kind, axis_partitions, n_axial, ell):
        if domain_kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {domain_kind!r}")
        self.domain_kind = domain_kind
        parts = []
        for part in axis_partitions:
            arr = np.asarray(part, dtype=float).copy()
            if arr.ndim != 1 or arr.size < 3 or np.any(np.diff(arr) <= 0):
                raise BadResolution(
                    "each axis needs a strictly increasing partition with >= 2 cells"
                )
            arr.setflags(write=False)
            parts.append(arr)
        self.axis_partitions = tuple(parts)
        self.n_axial = int(n_axial)
        self.ell = None if ell is None else float(ell)
        self.shape = tuple(len(p) for p in self.axis_partitions)
        self.ndim = len(self.shape)
        self.n_nodes = int(np.prod(self.shape))
        self.cells_shape = tuple(s - 1 for s in self.shape)
        self.n_cells = int(np.prod(self.cells_shape))
        self._tag_boundary()
        self.free_index = np.full(self.n_nodes, -1, dtype=np.int64)
        free = np.flatnonzero(~self.dirichlet_mask)
        self.free_index[free] = np.arange(free.size)
        self.free_nodes = free
        self.n_free = int(free.size)
        self._cache = {}

    # -- tagging ---------------------------------------------------------

    def _tag_boundary(self):
        grids = np.meshgrid(
            *[np.arange(s) for s in self.shape], indexing="ij", sparse=True
        )
        on_lo = [g == 0 for g in grids]
        on_hi = [g == s - 1 for g, s in zip(grids, self.shape)]
        boundary = np.zeros(self.shape, dtype=bool)
        for lo, hi in zip(on_lo, on_hi):
            boundary |= lo | hi
        cross_axes = range(self.n_axial, self.ndim)
        if self.domain_kind == "cross-section":
            dirichlet = boundary
        else:
            dirichlet = np.zeros(self.shape, dtype=bool)
            for a in cross_axes:
                dirichlet = dirichlet | on_lo[a] | on_hi[a]
            if self.domain_kind == "half-plus":
                dirichlet = dirichlet | on_hi[0]
            elif self.domain_kind == "half-minus":
                dirichlet = dirichlet | on_lo[0]
        self.dirichlet_mask = np.asarray(dirichlet).ravel()
        self._boundary_mask = boundary.ravel()
        self.dirichlet_mask.setflags(write=False)
        self._boundary_mask.setflags(write=False)

    # -- derived geometry (cached) ---------------------------------------

    @property
    def dirichlet_nodes(self):
        return np.flatnonzero(self.dirichlet_mask)

    @property
    def free_boundary_nodes(self):
        return np.flatnonzero(self._boundary_mask & ~self.dirichlet_mask)

    @property
    def cross_partitions(self):
        return self.axis_partitions[self.n_axial :]

    def node_coords(self):
        """(n_nodes, ndim) array of node coordinates, C-ordered."""
        if "coords" not in self._cache:
            grids = np.meshgrid(*self.axis_partitions, indexing="ij")
            self._cache["coords"] = np.stack([g.ravel() for g in grids], axis=1)
        return self._cache["coords"]

    def cell_node_indices(self):
        """(n_cells, 2**ndim) corner node indices; corners ordered with the
        last axis fastest, matching the reference element."""
        if "cells" not in self._cache:
            grids = np.meshgrid(
                *[np.arange(s - 1) for s in self.shape], indexing="ij"
            )
            base = [g.ravel() for g in grids]
            out = np.empty((self.n_cells, 2**self.ndim), dtype=np.int64)
            for k, corner in enumerate(
                itertools.product((0, 1), repeat=self.ndim)
            ):
                out[:, k] = np.ravel_multi_index(
                    tuple(base[a] + corner[a] for a in range(self.ndim)),
                    self.shape,
                )
            self._cache["cells"] = out
        return self._cache["cells"]

    def cell_sizes(self):
        """(n_cells, ndim) per-axis cell extents."""
        if "sizes" not in self._cache:
            diffs = [np.diff(p) for p in self.axis_partitions]
            grids = np.meshgrid(*diffs, indexing="ij")
            self._cache["sizes"] = np.stack([g.ravel() for g in grids], axis=1)
        return self._cache["sizes"]

    def cell_origins(self):
        """(n_cells, ndim) lower-corner coordinates."""
        if "origins" not in self._cache:
            lows = [p[:-1] for p in self.axis_partitions]
            grids = np.meshgrid(*lows, indexing="ij")
            self._cache["origins"] = np.stack([g.ravel() for g in grids], axis=1)
        return self._cache["origins"]

    def cell_centers(self):
        return self.cell_origins() + 0.5 * self.cell_sizes()

    def cell_volumes(self):
        return np.prod(self.cell_sizes(), axis=1)

    def measure(self):
        return float(np.prod([p[-1] - p[0] for p in self.axis_partitions]))

    # -- vectors over nodes ----------------------------------------------

    def scatter_free(self, free_values):
        """Free-node vector -> all-node vector with zeros on Dirichlet nodes."""
        free_values = np.asarray(free_values, dtype=float)
        if free_values.shape != (self.n_free,):
            raise MeshMismatch(
                f"expected {self.n_free} free values, got {free_values.shape}"
            )
        full = np.zeros(self.n_nodes)
        full[self.free_nodes] = free_values
        return full

    def restrict_free(self, node_values):
        node_values = np.asarray(node_values, dtype=float)
        if node_values.shape != (self.n_nodes,):
            raise MeshMismatch("node vector has wrong length")
        return node_values[self.free_nodes]

    @property
    def signature(self):
        sizes = "x".join(str(s - 1) for s in self.shape)
        return f"{self.domain_kind}[{sizes}]ell={self.ell}"

    def __repr__(self):
        return f"TensorMesh({self.signature}, nodes={self.n_nodes}, free={self.n_free})"


def _axis_cells(length, res):
    n = int(round(length * float(res)))
    if n < 2:
        raise BadResolution(
            f"axis of length {length} at {res} cells/unit gives {n} < 2 cells"
        )
    return n


def _graded_axis(lo, hi, res, grading, refine_lo, refine_hi):
    """Partition [lo, hi]; bands of width 1 at refined ends are split
    ``grading`` times finer.  Band points stay on the base lattice so
    graded meshes nest into finer/longer ones."""
    g = max(1, int(round(grading)))
    length = hi - lo
    if g == 1 or length < 3.0 or not (refine_lo or refine_hi):
        n = _axis_cells(length, res)
        return np.linspace(lo, hi, n + 1)
    pieces = []
    a, b = lo, hi
    if refine_lo:
        n = _axis_cells(1.0, res) * g
        pieces.append(np.linspace(lo, lo + 1.0, n + 1))
        a = lo + 1.0
    if refine_hi:
        b = hi - 1.0
    n_mid = _axis_cells(b - a, res)
    pieces.append(np.linspace(a, b, n_mid + 1))
    if refine_hi:
        n = _axis_cells(1.0, res) * g
        pieces.append(np.linspace(hi - 1.0, hi, n + 1))
    out = pieces[0]
    for piece in pieces[1:]:
        out = np.concatenate([out, piece[1:]])
    return out


def _normalize_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1 and omega.shape == (2,):
        omega = omega[None, :]
    if omega.ndim != 2 or omega.shape[1] != 2 or omega.shape[0] not in (1, 2):
        raise ValueError("omega must be an interval (lo, hi) or a box of two")
    if np.any(omega[:, 1] <= omega[:, 0]):
        raise ValueError("omega bounds must be increasing")
    return omega


def build_mesh(kind, ell=None, omega=(-1.0, 1.0), resolution=8, grading=1.0,
               node_cap=DEFAULT_NODE_CAP):
    """Build a tagged tensor mesh.

    ``resolution`` is cells per unit length, scalar or one value per axis
    (axial axes first).  ``grading`` refines the axial cells within
    distance 1 of each free end; it is ignored for cross-sections and for
    axes shorter than 3 units.
    """
    if kind not in DOMAIN_KINDS:
        raise ValueError(f"unknown domain kind {kind!r}")
    omega = _normalize_omega(omega)
    n_axial = 0 if kind == "cross-section" else (2 if kind == "multi-direction" else 1)
    if n_axial and (ell is None or ell <= 0):
        raise ValueError("ell must be positive for cylinder meshes")
    ndim = n_axial + omega.shape[0]
    res = np.broadcast_to(np.asarray(resolution, dtype=float), (ndim,))
    parts = []
    for a in range(n_axial):
        if kind == "half-plus":
            lo, hi, rlo, rhi = 0.0, ell, True, False
        elif kind == "half-minus":
            lo, hi, rlo, rhi = -ell, 0.0, False, True
        else:
            lo, hi, rlo, rhi = -ell, ell, True, True
        parts.append(_graded_axis(lo, hi, res[a], grading, rlo, rhi))
    for j, (lo, hi) in enumerate(omega):
        n = _axis_cells(hi - lo, res[n_axial + j])
        parts.append(np.linspace(lo, hi, n + 1))
    n_nodes = int(np.prod([len(p) for p in parts]))
    if n_nodes > node_cap:
        raise MemoryBudget(f"{n_nodes} nodes exceed cap {node_cap}")
    return TensorMesh(kind, parts, n_axial, None if kind == "cross-section" else ell)


def with_full_dirichlet(mesh):
    """Copy of a full-cylinder mesh with the entire boundary Dirichlet
    (the comparison problem of the all-Dirichlet spectrum)."""
    if mesh.domain_kind not in ("full-cylinder", "multi-direction"):
        raise MeshMismatch("full Dirichlet variant needs a full cylinder mesh")
    out = TensorMesh.__new__(TensorMesh)
    out.domain_kind = mesh.domain_kind
    out.axis_partitions = mesh.axis_partitions
    out.n_axial = mesh.n_axial
    out.ell = mesh.ell
    out.shape = mesh.shape
    out.ndim = mesh.ndim
    out.n_nodes = mesh.n_nodes
    out.cells_shape = mesh.cells_shape
    out.n_cells = mesh.n_cells
    out.dirichlet_mask = mesh._boundary_mask
    out._boundary_mask = mesh._boundary_mask
    out.free_index = np.full(out.n_nodes, -1, dtype=np.int64)
    free = np.flatnonzero(~out.dirichlet_mask)
    out.free_index[free] = np.arange(free.size)
    out.free_nodes = free
    out.n_free = int(free.size)
    out._cache = {}
    return out


def _axis_symmetric(part):
    return np.allclose(part + part[::-1], 0.0, atol=_EPS * max(1.0, abs(part[-1])))


def reflection_permutation(mesh):
    """Node permutation of (x1, X2) -> (-x1, -X2).

    Requires every axis partition to be symmetric about 0 and the tagging
    to be flip-invariant (full cylinders and cross-sections).
    """
    if mesh.domain_kind in ("half-plus", "half-minus"):
        raise NoReflectionSymmetry("half meshes are not reflection symmetric")
    for part in mesh.axis_partitions:
        if not _axis_symmetric(part):
            raise NoReflectionSymmetry("axis partition not symmetric about 0")
    grids = np.meshgrid(*[np.arange(s) for s in mesh.shape], indexing="ij")
    flipped = tuple(s - 1 - g for g, s in zip(grids, mesh.shape))
    perm = np.ravel_multi_index(flipped, mesh.shape).ravel()
    return perm


def free_reflection_permutation(mesh):
    """Reflection permutation restricted to free nodes."""
    perm = reflection_permutation(mesh)
    if not np.array_equal(mesh.dirichlet_mask, mesh.dirichlet_mask[perm]):
        raise NoReflectionSymmetry("boundary tags not reflection symmetric")
    free_perm = mesh.free_index[perm[mesh.free_nodes]]
    return free_perm


def _match_run(sub_part, sup_part, shift):
    shifted = sub_part + shift
    start = int(np.searchsorted(sup_part, shifted[0] - _EPS))
    stop = start + len(shifted)
    if stop > len(sup_part):
        raise MeshMismatch("shifted partition extends past the target mesh")
    if not np.allclose(sup_part[start:stop], shifted, atol=1e-10):
        raise MeshMismatch("axis partitions are not nested cell-for-cell")
    return start


def free_embedding(sub, sup, shift=None):
    """Map free-node indices of ``sub`` onto free-node indices of ``sup``.

    The shifted sub partition must appear cell-for-cell inside the super
    partition on every axis, so that extension by zero of a sub function
    is an exact member of the super trial space.  ``shift`` translates
    the sub mesh (per axis; scalar applies to axis 0).
    """
    if sub.ndim != sup.ndim:
        raise MeshMismatch("meshes have different dimension")
    shifts = np.zeros(sub.ndim)
    if shift is not None:
        if np.isscalar(shift):
            shifts[0] = float(shift)
        else:
            shifts[:] = np.asarray(shift, dtype=float)
    starts = [
        _match_run(sub.axis_partitions[a], sup.axis_partitions[a], shifts[a])
        for a in range(sub.ndim)
    ]
    grids = np.meshgrid(*[np.arange(s) for s in sub.shape], indexing="ij")
    sup_nodes = np.ravel_multi_index(
        tuple(g + st for g, st in zip(grids, starts)), sup.shape
    ).ravel()
    sub_free_to_sup_node = sup_nodes[sub.free_nodes]
    mapped = sup.free_index[sub_free_to_sup_node]
    if np.any(mapped < 0):
        raise MeshMismatch("a free sub node lands on a Dirichlet super node")
    return mapped


def extend_by_zero(sub, sup, free_values, shift=None):
    """Zero-extension of a sub free vector into the super free space."""
    mapping = free_embedding(sub, sup, shift)
    out = np.zeros(sup.n_free)
    out[mapping] = np.asarray(free_values, dtype=float)
    return out
