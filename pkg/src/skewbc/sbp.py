"""Diagonal-norm summation-by-parts operators on tensor-product grids.

Node ordering is ``k = j * nx + i`` (x varies fastest), so
``D_x = I_ny (x) D_1x`` and ``D_y = D_1y (x) I_nx``.  Boundary nodes are
enumerated south, east, north, west, each edge in increasing coordinate;
corner nodes appear once per edge they belong to.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

EDGES = ("south", "east", "north", "west")
EDGE_NORMALS = {
    "south": (0.0, -1.0),
    "east": (1.0, 0.0),
    "north": (0.0, 1.0),
    "west": (-1.0, 0.0),
}
MIN_NODES = {2: 3, 4: 8}

# 2-4 diagonal-norm closure: norm weights and the upper-left block of Q
_H4 = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0
_Q4 = np.array([
    [-1 / 2, 59 / 96, -1 / 12, -1 / 32, 0.0, 0.0],
    [-59 / 96, 0.0, 59 / 96, 0.0, 0.0, 0.0],
    [1 / 12, -59 / 96, 0.0, 59 / 96, -1 / 12, 0.0],
    [1 / 32, 0.0, -59 / 96, 0.0, 2 / 3, -1 / 12],
])
_INTERIOR4 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])


@dataclass(frozen=True)
class Sbp1D:
    order: int
    n_nodes: int
    spacing: float
    weights: np.ndarray  # diagonal of the norm
    Q: np.ndarray
    D: np.ndarray

    @property
    def P_norm(self):
        return np.diag(self.weights)

    @property
    def nodes(self):
        return self.spacing * np.arange(self.n_nodes)


def build_sbp_1d(order, n_nodes, spacing):
    if order not in MIN_NODES:
        raise ValueError(f"order must be 2 or 4, got {order}")
    if n_nodes < MIN_NODES[order]:
        raise ValueError(f"order {order} needs at least {MIN_NODES[order]} nodes, got {n_nodes}")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    n = n_nodes
    Q = np.zeros((n, n))
    w = np.ones(n)
    if order == 2:
        i = np.arange(n - 1)
        Q[i, i + 1] = 0.5
        Q[i + 1, i] = -0.5
        Q[0, 0] = -0.5
        Q[-1, -1] = 0.5
        w[0] = w[-1] = 0.5
    else:
        for r in range(4, n - 4):
            Q[r, r - 2:r + 3] = _INTERIOR4
        Q[:4, :6] = _Q4
        # right closure is the antisymmetric reflection of the left one
        Q[n - 4:, n - 6:] = -_Q4[::-1, ::-1]
        w[:4] = _H4
        w[n - 4:] = _H4[::-1]
    weights = spacing * w
    D = Q / weights[:, None]
    return Sbp1D(order, n, float(spacing), weights, Q, D)


@dataclass(frozen=True)
class SbpGrid:
    order: int
    nx: int
    ny: int
    domain: tuple
    sbp_x: Sbp1D
    sbp_y: Sbp1D
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    weights: np.ndarray  # diagonal of P_vol, length M
    E: sp.csr_matrix  # N x M restriction
    boundary_nodes: np.ndarray  # volume index of each boundary entry
    ds: np.ndarray  # diagonal of P_bnd
    normals: np.ndarray  # N x 2
    edges: np.ndarray  # edge label per boundary entry

    @property
    def M(self):
        return self.nx * self.ny

    @property
    def N(self):
        return len(self.boundary_nodes)

    @property
    def x(self):
        return self.domain[0] + self.sbp_x.nodes

    @property
    def y(self):
        return self.domain[2] + self.sbp_y.nodes

    @property
    def h_min(self):
        return min(self.sbp_x.spacing, self.sbp_y.spacing)

    def coordinates(self):
        X, Y = np.meshgrid(self.x, self.y)
        return X.reshape(-1), Y.reshape(-1)

    def boundary_positions(self):
        X, Y = self.coordinates()
        return np.stack([X[self.boundary_nodes], Y[self.boundary_nodes]], axis=1)

    @property
    def P_vol(self):
        return sp.diags(self.weights)

    @property
    def P_bnd(self):
        return sp.diags(self.ds)

    @property
    def N1(self):
        return sp.diags(self.normals[:, 0])

    @property
    def N2(self):
        return sp.diags(self.normals[:, 1])

    @property
    def Qx(self):
        return (self.P_vol @ self.Dx).tocsr()

    @property
    def Qy(self):
        return (self.P_vol @ self.Dy).tocsr()

    def apply_dx(self, values):
        """Matrix-free ``D_x`` on arrays shaped ``(..., ny, nx)``."""
        return values @ self.sbp_x.D.T

    def apply_dy(self, values):
        return np.einsum("jk,...ki->...ji", self.sbp_y.D, values)

    def sbp_residuals(self):
        """Max-abs residuals of ``Q_i + Q_i^T - E^T P_bnd N_i E``."""
        out = {}
        for name, Q, Nn in (("x", self.Qx, self.N1), ("y", self.Qy, self.N2)):
            R = Q + Q.T - self.E.T @ self.P_bnd @ Nn @ self.E
            out[name] = float(abs(R).max()) if R.nnz else 0.0
        return out


def _edge_enumeration(nx, ny, wx, wy):
    nodes, ds, normals, edges = [], [], [], []
    layout = {
        "south": ([i for i in range(nx)], wx),
        "east": ([j * nx + nx - 1 for j in range(ny)], wy),
        "north": ([(ny - 1) * nx + i for i in range(nx)], wx),
        "west": ([j * nx for j in range(ny)], wy),
    }
    for edge in EDGES:
        idx, w = layout[edge]
        nodes.extend(idx)
        ds.extend(w)
        normals.extend([EDGE_NORMALS[edge]] * len(idx))
        edges.extend([edge] * len(idx))
    return np.array(nodes), np.array(ds, dtype=float), np.array(normals), np.array(edges)


def assemble_grid(order, nx, ny, domain=(0.0, 1.0, 0.0, 1.0)):
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain extents {domain}")
    sx = build_sbp_1d(order, nx, (x1 - x0) / (nx - 1))
    sy = build_sbp_1d(order, ny, (y1 - y0) / (ny - 1))
    Dx = sp.kron(sp.identity(ny), sp.csr_matrix(sx.D), format="csr")
    Dy = sp.kron(sp.csr_matrix(sy.D), sp.identity(nx), format="csr")
    weights = np.kron(sy.weights, sx.weights)
    nodes, ds, normals, edges = _edge_enumeration(nx, ny, sx.weights, sy.weights)
    E = sp.csr_matrix((np.ones(len(nodes)), (np.arange(len(nodes)), nodes)), shape=(len(nodes), nx * ny))
    Dx.eliminate_zeros()
    Dy.eliminate_zeros()
    return SbpGrid(order, nx, ny, (x0, x1, y0, y1), sx, sy, Dx, Dy, weights, E, nodes, ds, normals, edges)


def permutation_matrix(n_vars, n_bnd):
    """Map component-major boundary stacks to node-major ones."""
    rows = np.array([j * n_vars + a for a in range(n_vars) for j in range(n_bnd)])
    cols = np.arange(n_vars * n_bnd)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_vars * n_bnd, n_vars * n_bnd))


def build_lifting_map(grid, n_vars):
    """``DC = (I_n (x) E^T) P_erm^T (P_bnd (x) I_n)``.

    Takes a node-major stack of per-node penalty vectors and returns the
    boundary-integrated contribution in component-major volume layout.
    """
    perm = permutation_matrix(n_vars, grid.N)
    scale = sp.kron(grid.P_bnd, sp.identity(n_vars))
    spread = sp.kron(sp.identity(n_vars), grid.E.T)
    return (spread @ perm.T @ scale).tocsr()


def dump_matrix(matrix, path):
    """Write a matrix as plain text, one row per line, full precision."""
    M = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    with open(path, "w") as fh:
        for row in np.atleast_2d(M):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path):
    return np.loadtxt(path, ndmin=2)
