"""Uniformly convex model domains and finite-difference grids on them.

The model domains are an interval (n = 1), a disk, and an axis-aligned
ellipse (n = 2).  A domain is discretized on an axis-aligned Cartesian
lattice; lattice points inside the domain become interior nodes.  Wherever
one of the eight stencil arms of an interior node (two per coordinate axis,
four diagonal) leaves the domain, the crossing point with the boundary
becomes a boundary node and the shortened arm length is recorded
(Shortley-Weller).  Second derivatives along each stencil line use the
three-point formula on unequal arms, which is exact for quadratics, so
Hessians of quadratic fields are reproduced exactly at every interior node,
regular or irregular.  The center weight is computed as minus the sum of the
arm weights, so the discrete operators annihilate constants exactly in
floating point.

Interior quadrature assigns each full lattice cell a midpoint weight at its
node and redistributes the exact clipped area of each boundary cell onto
nearby nodes with weights that reproduce quadratic functions, so the weights
sum to |Omega| to machine precision.  Boundary quadrature is the trapezoid
rule on chords between boundary nodes ordered along the boundary.  Normal
derivatives at boundary nodes use a second-order one-sided difference along
the inward normal, with off-lattice values obtained from moving
least-squares quadratic fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .exceptions import DomainError, GridResolutionError

# Lattice points closer to the boundary than this fraction of the cell size
# are treated as boundary-adjacent exterior points; keeps stencil arm lengths
# bounded away from zero.
SNAP_FRACTION = 1e-3

_VALID_KINDS = ("interval", "disk", "ellipse")


@dataclass(frozen=True)
class DomainSpec:
    """A uniformly convex model domain.

    kind is one of "interval", "disk", "ellipse"; bounds holds (a, b) for an
    interval, (radius,) for a disk and (semi_a, semi_b) for an ellipse.
    """

    kind: str
    bounds: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _VALID_KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        vals = tuple(float(v) for v in self.bounds)
        object.__setattr__(self, "bounds", vals)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("domain parameters must be finite")
        if self.kind == "interval":
            if len(vals) != 2 or vals[0] >= vals[1]:
                raise DomainError("interval requires bounds (a, b) with a < b")
        elif self.kind == "disk":
            if len(vals) != 1 or vals[0] <= 0:
                raise DomainError("disk requires a positive radius")
        else:
            if len(vals) != 2 or min(vals) <= 0:
                raise DomainError("ellipse requires positive semi-axes")

    @staticmethod
    def interval(a: float, b: float) -> "DomainSpec":
        return DomainSpec("interval", (a, b))

    @staticmethod
    def disk(radius: float) -> "DomainSpec":
        return DomainSpec("disk", (radius,))

    @staticmethod
    def ellipse(semi_a: float, semi_b: float) -> "DomainSpec":
        return DomainSpec("ellipse", (semi_a, semi_b))

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def semi_axes(self) -> Tuple[float, float]:
        if self.kind == "disk":
            return (self.bounds[0], self.bounds[0])
        if self.kind == "ellipse":
            return self.bounds
        raise DomainError("semi_axes undefined for an interval")

    @property
    def diameter(self) -> float:
        if self.kind == "interval":
            return self.bounds[1] - self.bounds[0]
        a, b = self.semi_axes
        return 2.0 * max(a, b)

    @property
    def min_boundary_curvature(self) -> float:
        """Positive lower bound for the boundary curvature (1.0 for n = 1)."""
        if self.kind == "interval":
            return 1.0
        a, b = self.semi_axes
        return min(a / b**2, b / a**2)

    @property
    def measure(self) -> float:
        """Length of the interval, or area of the disk/ellipse."""
        if self.kind == "interval":
            return self.bounds[1] - self.bounds[0]
        a, b = self.semi_axes
        return math.pi * a * b

    # The 2-d level function is x^2/A^2 + y^2/B^2 - 1: dimensionless,
    # negative inside, exactly quadratic, so ray crossings solve in closed
    # form.
    def level(self, x, y):
        a, b = self.semi_axes
        return (np.asarray(x) / a) ** 2 + (np.asarray(y) / b) ** 2 - 1.0

    def level_gradient(self, x, y):
        a, b = self.semi_axes
        return 2.0 * np.asarray(x) / a**2, 2.0 * np.asarray(y) / b**2

    def inside_distance(self, x, y):
        """Approximate signed distance to the boundary, positive inside."""
        gx, gy = self.level_gradient(x, y)
        norm = np.maximum(np.hypot(gx, gy), 1e-300)
        return -self.level(x, y) / norm

    def outward_normal(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        gx, gy = self.level_gradient(pts[:, 0], pts[:, 1])
        norm = np.hypot(gx, gy)
        out = np.column_stack([gx / norm, gy / norm])
        return out if np.asarray(points).ndim == 2 else out[0]

    def boundary_point(self, t):
        """Point on the boundary at parameter t (angle for disk/ellipse)."""
        a, b = self.semi_axes
        t = np.asarray(t, dtype=float)
        return np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def boundary_param(self, points: np.ndarray) -> np.ndarray:
        a, b = self.semi_axes
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.arctan2(pts[:, 1] / b, pts[:, 0] / a)

    def ray_boundary_distance(self, px, py, ux, uy):
        """Distance from interior points p along unit directions u to the boundary.

        Solves the quadratic level(p + s u) = 0 for the positive root with a
        cancellation-safe formula.
        """
        a, b = self.semi_axes
        qa = (ux / a) ** 2 + (uy / b) ** 2
        qb = 2.0 * (px * ux / a**2 + py * uy / b**2)
        qc = self.level(px, py)
        disc = np.sqrt(qb**2 - 4.0 * qa * qc)
        # qc < 0 inside, so the roots straddle zero; pick the stable form of
        # the positive one depending on the sign of qb.
        s_plus = np.where(qb <= 0.0, (-qb + disc) / (2.0 * qa), -2.0 * qc / (disc + qb))
        return s_plus


def gauss_curvature(domain: DomainSpec, point, tol: float = 1e-8) -> float:
    """Gauss (here: plane) curvature of the boundary at a boundary point.

    For n = 1 the convention K = 1 is used.  Raises DomainError when the
    point is not on the boundary within the dimensionless level tolerance.
    """
    if domain.kind == "interval":
        x = float(np.atleast_1d(np.asarray(point, dtype=float)).ravel()[0])
        a, b = domain.bounds
        scale = b - a
        if min(abs(x - a), abs(x - b)) > tol * scale:
            raise DomainError("point not on boundary")
        return 1.0
    pt = np.asarray(point, dtype=float).ravel()
    if abs(float(domain.level(pt[0], pt[1]))) > tol:
        raise DomainError("point not on boundary")
    a, b = domain.semi_axes
    gx, gy = 2.0 * pt[0] / a**2, 2.0 * pt[1] / b**2
    lxx, lyy = 2.0 / a**2, 2.0 / b**2
    grad3 = math.hypot(gx, gy) ** 3
    # Implicit curve curvature with l_xy = 0 for these quadrics.
    return float((gx**2 * lyy + gy**2 * lxx) / grad3)


class ScalarField:
    """Values attached to every node (interior then boundary) of one grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: "Grid", values):
        vals = np.array(values, dtype=float, copy=True)
        if vals.shape != (grid.n_nodes,):
            raise ValueError(
                f"expected {grid.n_nodes} node values, got shape {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def from_function(cls, grid: "Grid", fn: Callable) -> "ScalarField":
        pts = grid.points
        return cls(grid, np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(grid.n_nodes))

    @classmethod
    def constant(cls, grid: "Grid", value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @property
    def interior(self) -> np.ndarray:
        return self.values[: self.grid.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[self.grid.n_interior :]


class MatrixField:
    """A symmetric matrix per interior node (Hessians, cofactor fields)."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: "Grid", data):
        arr = np.array(data, dtype=float, copy=True)
        n = grid.dim
        if arr.shape != (grid.n_interior, n, n):
            raise ValueError(f"expected shape {(grid.n_interior, n, n)}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("MatrixField is immutable")


class Grid:
    """Cartesian grid with boundary-fitted stencil data for one domain.

    Nodes are ordered interior first (lattice row-major) and boundary second
    (by boundary parameter).  Per interior node the eight stencil arms are
    stored as (kind, index, distance) triples, kind 0 pointing at an interior
    node and kind 1 at a boundary node.  Arm order: +x, -x, +y, -y, and for
    n = 2 the diagonals +(hx,hy), -(hx,hy), +(hx,-hy), -(hx,-hy).
    """

    def __init__(self, domain, resolution, hx, hy, points, n_interior,
                 arm_kind, arm_index, arm_dist,
                 boundary_normals, boundary_curvature, boundary_params,
                 boundary_arcweights, quad_weights):
        self.domain = domain
        self.resolution = resolution
        self.hx = hx
        self.hy = hy
        self.h = min(hx, hy)
        self.points = points
        self.n_interior = n_interior
        self.n_boundary = points.shape[0] - n_interior
        self.arm_kind = arm_kind
        self.arm_index = arm_index
        self.arm_dist = arm_dist
        self.boundary_normals = boundary_normals
        self.boundary_curvature = boundary_curvature
        self.boundary_params = boundary_params
        self.boundary_arcweights = boundary_arcweights
        self.quad_weights = quad_weights
        self.regular_mask = np.all(arm_kind == 0, axis=1)
        self._second_ops = None
        self._tree = None
        self._interior_tree = None
        self._nearest_interior = None
        self._normal_sampler = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    @property
    def interior_points(self) -> np.ndarray:
        return self.points[: self.n_interior]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.points[self.n_interior :]

    def field(self, fn: Callable) -> ScalarField:
        return ScalarField.from_function(self, fn)

    def boundary_values(self, fn: Callable) -> np.ndarray:
        bp = self.boundary_points
        return np.asarray(fn(bp[:, 0], bp[:, 1]), dtype=float) * np.ones(self.n_boundary)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    @property
    def nearest_interior(self) -> np.ndarray:
        """Index of the nearest interior node for each boundary node."""
        if self._nearest_interior is None:
            if self._interior_tree is None:
                self._interior_tree = cKDTree(self.interior_points)
            _, idx = self._interior_tree.query(self.boundary_points)
            self._nearest_interior = np.asarray(idx, dtype=int)
        return self._nearest_interior

    @property
    def second_ops(self):
        """Per stencil axis, a pair (S_int, S_bdy) of sparse matrices.

        S_int @ u_interior + S_bdy @ u_boundary is the second directional
        derivative along that axis at every interior node.  Axes: x, y and
        for n = 2 the two lattice diagonals.
        """
        if self._second_ops is None:
            self._second_ops = _build_second_ops(self)
        return self._second_ops

    # --- moving least squares sampling -----------------------------------

    def _fit_rows(self, center, k=12):
        k = min(k, self.n_nodes)
        _, idx = self.tree.query(center, k=k)
        idx = np.atleast_1d(idx)
        z = (self.points[idx] - np.asarray(center)) / self.h
        m = np.column_stack([
            np.ones(len(idx)), z[:, 0], z[:, 1],
            z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2,
        ])
        return idx, np.linalg.pinv(m, rcond=1e-10)

    def sample(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Sample node values at arbitrary points by local quadratic fits."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0])
        for i, p in enumerate(pts):
            idx, pinv = self._fit_rows(p)
            out[i] = pinv[0] @ values[idx]
        return out

    def fit_hessian_at(self, values: np.ndarray, center) -> np.ndarray:
        """Hessian of a node field at an arbitrary point (exact for quadratics)."""
        idx, pinv = self._fit_rows(center)
        coef = pinv @ values[idx]
        h2 = self.h**2
        return np.array([[2.0 * coef[3], coef[4]], [coef[4], 2.0 * coef[5]]]) / h2


def build_grid(domain: DomainSpec, resolution: int) -> Grid:
    """Build the grid for a domain.

    resolution is the number of lattice points per axis spanning the bounding
    box, boundary included: an interval (a, b) at resolution 5 has nodes
    a, a+h, ..., b with h = (b-a)/4.
    """
    resolution = int(resolution)
    if resolution < 4:
        raise GridResolutionError("resolution must be at least 4")
    if domain.dim == 1:
        return _build_grid_1d(domain, resolution)
    return _build_grid_2d(domain, resolution)


def _build_grid_1d(domain: DomainSpec, res: int) -> Grid:
    a, b = domain.bounds
    xs = np.linspace(a, b, res)
    h = xs[1] - xs[0]
    n_int = res - 2
    points = np.zeros((res, 2))
    points[:n_int, 0] = xs[1:-1]
    points[n_int, 0] = a
    points[n_int + 1, 0] = b

    arm_kind = np.zeros((n_int, 2), dtype=np.int8)
    arm_index = np.zeros((n_int, 2), dtype=np.int64)
    arm_dist = np.full((n_int, 2), h)
    # arm 0: +x, arm 1: -x
    arm_index[:, 0] = np.arange(1, n_int + 1)
    arm_index[:, 1] = np.arange(-1, n_int - 1)
    arm_kind[-1, 0] = 1
    arm_index[-1, 0] = 1  # right endpoint
    arm_kind[0, 1] = 1
    arm_index[0, 1] = 0  # left endpoint

    normals = np.array([[-1.0, 0.0], [1.0, 0.0]])
    curvature = np.ones(2)
    params = np.array([0.0, 1.0])
    arcweights = np.ones(2)  # counting measure on the two endpoints

    quad = np.full(res, h)
    quad[n_int:] = h / 2.0  # trapezoid end weights

    return Grid(domain, res, h, h, points, n_int, arm_kind, arm_index,
                arm_dist, normals, curvature, params, arcweights, quad)


_ARMS_2D = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))


def _build_grid_2d(domain: DomainSpec, res: int) -> Grid:
    a, b = domain.semi_axes
    xs = np.linspace(-a, a, res)
    ys = np.linspace(-b, b, res)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    h = min(hx, hy)
    diag = math.hypot(hx, hy)

    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = domain.inside_distance(X, Y) > SNAP_FRACTION * h
    ii, jj = np.nonzero(inside)
    n_int = ii.size
    if n_int == 0:
        raise GridResolutionError("no interior nodes; refine the grid")
    index2d = np.full((res, res), -1, dtype=np.int64)
    index2d[ii, jj] = np.arange(n_int)
    ipts = np.column_stack([xs[ii], ys[jj]])

    arm_len = (hx, hx, hy, hy, diag, diag, diag, diag)
    arm_kind = np.zeros((n_int, 8), dtype=np.int8)
    arm_index = np.full((n_int, 8), -1, dtype=np.int64)
    arm_dist = np.zeros((n_int, 8))

    cand_pos = []
    cand_ref = []  # (interior node row, arm)
    for arm, (di, dj) in enumerate(_ARMS_2D):
        ni, nj = ii + di, jj + dj
        in_bounds = (ni >= 0) & (ni < res) & (nj >= 0) & (nj < res)
        nbr_interior = np.zeros(n_int, dtype=bool)
        nbr_interior[in_bounds] = inside[ni[in_bounds], nj[in_bounds]]
        arm_dist[nbr_interior, arm] = arm_len[arm]
        arm_index[nbr_interior, arm] = index2d[ni[nbr_interior], nj[nbr_interior]]
        cross = ~nbr_interior
        if not np.any(cross):
            continue
        arm_kind[cross, arm] = 1
        ux = di * hx / arm_len[arm]
        uy = dj * hy / arm_len[arm]
        s = domain.ray_boundary_distance(ipts[cross, 0], ipts[cross, 1], ux, uy)
        if np.any(~np.isfinite(s)) or np.any(s <= 0) or np.any(s > 2.0 * arm_len[arm]):
            raise GridResolutionError("boundary crossing outside expected range")
        arm_dist[cross, arm] = s
        cand_pos.append(np.column_stack([ipts[cross, 0] + s * ux, ipts[cross, 1] + s * uy]))
        rows = np.nonzero(cross)[0]
        cand_ref.extend((r, arm) for r in rows)

    cand_pos = np.vstack(cand_pos)
    cand_t = domain.boundary_param(cand_pos)
    order = np.argsort(cand_t, kind="stable")

    # Cluster candidates that coincide (same crossing reached from two arms).
    tol_t = 1e-10
    cluster_of = np.empty(len(order), dtype=np.int64)
    rep_rows = []
    prev_t = None
    for rank, ci in enumerate(order):
        t = cand_t[ci]
        if prev_t is None or t - prev_t > tol_t:
            rep_rows.append(ci)
        cluster_of[ci] = len(rep_rows) - 1
        prev_t = t
    # wrap-around merge at the -pi/+pi seam
    if len(rep_rows) > 1:
        t_first = cand_t[rep_rows[0]]
        t_last = cand_t[rep_rows[-1]]
        if (t_first + 2.0 * math.pi) - t_last <= tol_t:
            last_id = len(rep_rows) - 1
            cluster_of[cluster_of == last_id] = 0
            rep_rows.pop()

    bpts = cand_pos[rep_rows]
    bparams = cand_t[rep_rows]
    n_bdy = len(rep_rows)
    for k, (row, arm) in enumerate(cand_ref):
        arm_index[row, arm] = cluster_of[k]

    points = np.vstack([ipts, bpts])
    normals = domain.outward_normal(bpts)
    curvature = np.array([gauss_curvature(domain, p, tol=1e-6) for p in bpts])

    # Trapezoid arc weights on the closed polygon of boundary nodes.
    nxt = np.roll(np.arange(n_bdy), -1)
    chord = np.linalg.norm(bpts[nxt] - bpts, axis=1)
    arcweights = 0.5 * (chord + np.roll(chord, 1))

    quad = _interior_quadrature(domain, xs, ys, hx, hy, inside, index2d,
                                ipts, bpts, n_int)

    grid = Grid(domain, res, hx, hy, points, n_int, arm_kind, arm_index,
                arm_dist, normals, curvature, bparams, arcweights, quad)
    total = quad.sum()
    if abs(total - domain.measure) > 1e-8 * domain.measure:
        raise GridResolutionError(
            f"quadrature weights sum to {total}, expected {domain.measure}")
    return grid


def _disk_rect_moments(x0, x1, y0, y1):
    """Exact (area, int x dA, int y dA) of [x0,x1]x[y0,y1] within the unit disk."""
    lo, hi = max(x0, -1.0), min(x1, 1.0)
    if lo >= hi:
        return 0.0, 0.0, 0.0

    cuts = {lo, hi}
    for yv in (y0, y1):
        if abs(yv) < 1.0:
            xc = math.sqrt(1.0 - yv * yv)
            for c in (-xc, xc):
                if lo < c < hi:
                    cuts.add(c)
    xs = sorted(cuts)

    def F_c(x):  # integral of sqrt(1-x^2)
        x = min(1.0, max(-1.0, x))
        return 0.5 * (x * math.sqrt(max(0.0, 1.0 - x * x)) + math.asin(x))

    def F_xc(x):  # integral of x*sqrt(1-x^2)
        return -((max(0.0, 1.0 - x * x)) ** 1.5) / 3.0

    def F_c2(x):  # integral of (1-x^2)
        return x - x**3 / 3.0

    area = mx = my = 0.0
    for p, q in zip(xs[:-1], xs[1:]):
        if q - p < 1e-15:
            continue
        xm = 0.5 * (p + q)
        c = math.sqrt(max(0.0, 1.0 - xm * xm))
        yu_cap = y1 >= c  # upper limit is the circle on this piece
        yl_cap = y0 <= -c  # lower limit is the circle
        yu = c if yu_cap else y1
        yl = -c if yl_cap else y0
        if yu <= yl:
            continue
        # area terms
        ua = F_c(q) - F_c(p) if yu_cap else y1 * (q - p)
        la = -(F_c(q) - F_c(p)) if yl_cap else y0 * (q - p)
        area += ua - la
        # x-moment terms
        uxm = F_xc(q) - F_xc(p) if yu_cap else y1 * 0.5 * (q * q - p * p)
        lxm = -(F_xc(q) - F_xc(p)) if yl_cap else y0 * 0.5 * (q * q - p * p)
        mx += uxm - lxm
        # y-moment: integral of (yu^2 - yl^2)/2
        uy2 = (F_c2(q) - F_c2(p)) if yu_cap else y1 * y1 * (q - p)
        ly2 = (F_c2(q) - F_c2(p)) if yl_cap else y0 * y0 * (q - p)
        my += 0.5 * (uy2 - ly2)
    return area, mx, my


def _interior_quadrature(domain, xs, ys, hx, hy, inside, index2d, ipts, bpts, n_int):
    a, b = domain.semi_axes
    res = xs.size
    n_nodes = n_int + bpts.shape[0]
    w = np.zeros(n_nodes)

    # Corner grid of the lattice cells (cell of node (i,j) is
    # [xs[i]-hx/2, xs[i]+hx/2] x [ys[j]-hy/2, ys[j]+hy/2]).
    xc = np.concatenate([xs - hx / 2.0, [xs[-1] + hx / 2.0]])
    yc = np.concatenate([ys - hy / 2.0, [ys[-1] + hy / 2.0]])
    XC, YC = np.meshgrid(xc, yc, indexing="ij")
    corner_in = domain.level(XC, YC) < 0.0
    cell_full = (corner_in[:-1, :-1] & corner_in[1:, :-1]
                 & corner_in[:-1, 1:] & corner_in[1:, 1:])

    full_and_interior = cell_full & inside
    if np.any(cell_full & ~inside):
        # A cell strictly inside the domain always has an interior center.
        raise GridResolutionError("inconsistent cell classification")
    w_idx = index2d[full_and_interior]
    np.add.at(w, w_idx, hx * hy)

    # Remaining cells: exact clipped area, redistributed with
    # quadratic-reproducing weights onto the nearest nodes.
    all_points = np.vstack([ipts, bpts])
    tree = cKDTree(all_points)
    cell_area = hx * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    dist = domain.inside_distance(X, Y)
    reject = dist < -2.0 * math.hypot(hx, hy)
    partial = ~cell_full & ~reject
    pi_idx, pj_idx = np.nonzero(partial)
    hscale = min(hx, hy)
    for i, j in zip(pi_idx, pj_idx):
        x0, x1 = (xs[i] - hx / 2.0) / a, (xs[i] + hx / 2.0) / a
        y0, y1 = (ys[j] - hy / 2.0) / b, (ys[j] + hy / 2.0) / b
        ar, mx, my = _disk_rect_moments(x0, x1, y0, y1)
        area = ar * a * b
        if area <= 1e-14 * cell_area:
            continue
        cxp = a * mx / ar
        cyp = b * my / ar
        k = min(10, n_nodes)
        _, idx = tree.query((cxp, cyp), k=k)
        idx = np.atleast_1d(idx)
        z = (all_points[idx] - np.array([cxp, cyp])) / hscale
        m = np.column_stack([np.ones(len(idx)), z[:, 0], z[:, 1],
                             z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2])
        lam = np.linalg.pinv(m, rcond=1e-10)[0]
        np.add.at(w, idx, area * lam)
    return w


def _build_second_ops(grid: Grid):
    n_axes = 1 if grid.dim == 1 else 4
    ops = []
    n_int, n_bdy = grid.n_interior, grid.n_boundary
    rows = np.arange(n_int)
    for ax in range(n_axes):
        dp = grid.arm_dist[:, 2 * ax]
        dm = grid.arm_dist[:, 2 * ax + 1]
        cp = 2.0 / (dp * (dp + dm))
        cm = 2.0 / (dm * (dp + dm))
        c0 = -(cp + cm)  # exact constant annihilation
        r_list = [rows]
        c_list = [rows]
        v_list = [c0]
        rb_list, cb_list, vb_list = [], [], []
        for arm, cval in ((2 * ax, cp), (2 * ax + 1, cm)):
            kind = grid.arm_kind[:, arm]
            idx = grid.arm_index[:, arm]
            is_int = kind == 0
            r_list.append(rows[is_int])
            c_list.append(idx[is_int])
            v_list.append(cval[is_int])
            rb_list.append(rows[~is_int])
            cb_list.append(idx[~is_int])
            vb_list.append(cval[~is_int])
        s_int = sp.coo_matrix(
            (np.concatenate(v_list), (np.concatenate(r_list), np.concatenate(c_list))),
            shape=(n_int, n_int)).tocsr()
        s_bdy = sp.coo_matrix(
            (np.concatenate(vb_list), (np.concatenate(rb_list), np.concatenate(cb_list))),
            shape=(n_int, n_bdy)).tocsr()
        ops.append((s_int, s_bdy))
    return ops


# --- discrete calculus ----------------------------------------------------


def hessian(u: ScalarField, grid: Grid = None) -> MatrixField:
    """Discrete Hessian at every interior node.

    Central second differences on regular stencils; three-point formulas on
    shortened Shortley-Weller arms near the boundary.  The mixed derivative
    is recovered from the two diagonal directional second derivatives.
    """
    grid = grid or u.grid
    ui, ub = u.interior, u.boundary
    ops = grid.second_ops

    def d2(axis):
        s_int, s_bdy = ops[axis]
        return s_int @ ui + s_bdy @ ub

    if grid.dim == 1:
        return MatrixField(grid, d2(0)[:, None, None])
    uxx = d2(0)
    uyy = d2(1)
    upp = d2(2)
    umm = d2(3)
    ell2 = grid.hx**2 + grid.hy**2
    uxy = (upp - umm) * ell2 / (4.0 * grid.hx * grid.hy)
    data = np.empty((grid.n_interior, 2, 2))
    data[:, 0, 0] = uxx
    data[:, 1, 1] = uyy
    data[:, 0, 1] = uxy
    data[:, 1, 0] = uxy
    return MatrixField(grid, data)


def det_field(H: MatrixField, grid: Grid = None) -> ScalarField:
    """Determinant of a matrix field, extended to boundary nodes.

    Boundary values are one-sided (nearest interior node) extrapolations.
    """
    grid = grid or H.grid
    d = H.data
    if grid.dim == 1:
        dets = d[:, 0, 0].copy()
    else:
        dets = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
    return ScalarField(grid, extend_to_boundary(grid, dets))


def extend_to_boundary(grid: Grid, interior_values: np.ndarray) -> np.ndarray:
    """Extend interior node values to all nodes by nearest-interior copy."""
    vals = np.empty(grid.n_nodes)
    vals[: grid.n_interior] = interior_values
    vals[grid.n_interior :] = interior_values[grid.nearest_interior]
    return vals


def cofactor(H: MatrixField, grid: Grid = None) -> MatrixField:
    """Cofactor matrix field; identically 1 in one dimension."""
    grid = grid or H.grid
    if grid.dim == 1:
        return MatrixField(grid, np.ones_like(H.data))
    d = H.data
    out = np.empty_like(d)
    out[:, 0, 0] = d[:, 1, 1]
    out[:, 1, 1] = d[:, 0, 0]
    out[:, 0, 1] = -d[:, 0, 1]
    out[:, 1, 0] = -d[:, 1, 0]
    return MatrixField(grid, out)


def is_positive_definite(H: MatrixField) -> np.ndarray:
    """Per-node positive definiteness flags (symmetric 1x1 or 2x2 data)."""
    d = H.data
    if d.shape[1] == 1:
        return d[:, 0, 0] > 0.0
    dets = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] ** 2
    return (dets > 0.0) & (d[:, 0, 0] + d[:, 1, 1] > 0.0)


def boundary_normal_derivative(u: ScalarField, grid: Grid = None) -> np.ndarray:
    """Outward normal derivative of u at every boundary node.

    Second-order one-sided difference along -nu into the domain; in two
    dimensions the two inner samples come from moving least-squares
    quadratic fits, so the result is exact for quadratic fields.
    """
    grid = grid or u.grid
    vals = u.values
    nb = grid.n_interior
    if grid.dim == 1:
        h = grid.hx
        n_int = grid.n_interior
        xs = grid.points[:, 0]
        order = np.argsort(xs[:n_int], kind="stable")
        left2, left1 = vals[order[0]], vals[order[1]]
        right1, right2 = vals[order[-2]], vals[order[-1]]
        ua, ub_ = vals[nb], vals[nb + 1]
        dn_a = (3.0 * ua - 4.0 * left2 + left1) / (2.0 * h)
        dn_b = (3.0 * ub_ - 4.0 * right2 + right1) / (2.0 * h)
        return np.array([dn_a, dn_b])

    if grid._normal_sampler is None:
        delta = grid.h
        bpts = grid.boundary_points
        nrm = grid.boundary_normals
        samplers = []
        for depth in (1.0, 2.0):
            pts = bpts - depth * delta * nrm
            lev = grid.domain.level(pts[:, 0], pts[:, 1])
            if np.any(lev >= 0.0):
                raise GridResolutionError(
                    "normal-derivative stencil leaves the domain; refine the grid")
            idx_rows = []
            lam_rows = []
            for p in pts:
                idx, pinv = grid._fit_rows(p)
                idx_rows.append(idx)
                lam_rows.append(pinv[0])
            samplers.append((np.array(idx_rows), np.array(lam_rows)))
        grid._normal_sampler = (delta, samplers)

    delta, samplers = grid._normal_sampler
    ub = vals[nb:]
    (i1, l1), (i2, l2) = samplers
    u1 = np.einsum("ij,ij->i", l1, vals[i1])
    u2 = np.einsum("ij,ij->i", l2, vals[i2])
    return (3.0 * ub - 4.0 * u1 + u2) / (2.0 * delta)


def integrate_interior(field, grid: Grid) -> float:
    """Quadrature of a node field over the domain interior."""
    vals = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
    if vals.shape != (grid.n_nodes,):
        raise ValueError(f"expected {grid.n_nodes} node values")
    return float(grid.quad_weights @ vals)


def integrate_boundary(boundary_values, grid: Grid) -> float:
    """Quadrature of boundary node values over the boundary."""
    vals = np.asarray(boundary_values, dtype=float)
    if vals.shape != (grid.n_boundary,):
        raise ValueError(f"expected {grid.n_boundary} boundary values")
    return float(grid.boundary_arcweights @ vals)


def cofactor_divergence(U: MatrixField, grid: Grid = None):
    """Row-wise discrete divergence of a cofactor field, where evaluable.

    Returns (div, mask): div has one row per interior node with the two
    components sum_j D_j U^{ij}; mask marks nodes whose central-difference
    stencil touches only regular-stencil interior nodes, where the values
    carry a clean truncation order.  Two-dimensional grids only.
    """
    grid = grid or U.grid
    if grid.dim != 2:
        raise ValueError("cofactor divergence check requires a 2-d grid")
    n_int = grid.n_interior
    kind = grid.arm_kind
    idx = grid.arm_index
    reg = grid.regular_mask

    has_axis = (kind[:, 0] == 0) & (kind[:, 1] == 0) & (kind[:, 2] == 0) & (kind[:, 3] == 0)
    mask = reg & has_axis
    for arm in range(4):
        nbr_ok = np.zeros(n_int, dtype=bool)
        rows = has_axis
        nbr_ok[rows] = reg[idx[rows, arm]]
        mask &= nbr_ok

    div = np.zeros((n_int, 2))
    rows = np.nonzero(mask)[0]
    e, wst, nth, sth = (idx[rows, 0], idx[rows, 1], idx[rows, 2], idx[rows, 3])
    d = U.data
    for comp in range(2):
        dx = (d[e, comp, 0] - d[wst, comp, 0]) / (2.0 * grid.hx)
        dy = (d[nth, comp, 1] - d[sth, comp, 1]) / (2.0 * grid.hy)
        div[rows, comp] = dx + dy
    return div, mask
