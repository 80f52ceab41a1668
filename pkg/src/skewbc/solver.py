"""Semi-discrete SBP-SAT scheme, time integration and energy certification.

The scheme is

    (P (x) I) U_t + theta [D_i A_i U + A_i^T D_i U] + C U + theta L_D = 0,
    L_D = (I (x) P_vol)^{-1} DC L_C,

with per-boundary-node penalties ``L_C`` from the general boundary
condition.  Multiplying by ``2 U^T (I (x) P_vol)`` gives

    d/dt ||U||^2 = -2 theta sum_j [W^T Lambda W + 2 (W^-)^T Sigma (...)]_j ds_j,

which :func:`energy_rate_identity` checks to rounding error.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .boundary import (
    BoundaryCondition,
    glancing_split,
    penalty_from_split,
    boundary_flux_from_split,
    resolve_formulation,
)
from .core import ConstraintViolation, DegenerateRotation, SkewBCError, StateField, total_energy
from .sbp import EDGES, SbpGrid, build_lifting_map

log = logging.getLogger(__name__)

IDENTITY_RTOL = 1e-11
COMMUTE_TOL = 1e-13
RK4_STABILITY = 2.5  # conservative extent of the RK4 region along the axes


class AdmissibilityLoss(SkewBCError):
    """A stage state left the admissible set during time integration."""

    def __init__(self, message, snapshot=None, ledger=None):
        super().__init__(message)
        self.snapshot = snapshot
        self.ledger = ledger


@dataclass
class NodeTerms:
    split: object
    flux: float  # W^T Lambda W
    penalty_flux: float  # 2 (W^-)^T Sigma (W^- - R W^+ - S^{-1} G)
    penalty: np.ndarray  # 2 (J^- T^{-1})^T Sigma (...)
    data_sq: float  # G^T G


class SemiDiscreteSystem:
    """Model, grid and per-edge boundary conditions.

    ``bcs`` maps edge names to :class:`BoundaryCondition` or ``None`` (no
    condition imposed).  ``node_overrides`` maps boundary-entry indices to a
    condition replacing the edge's one.
    """

    def __init__(self, model, grid: SbpGrid, bcs=None, node_overrides=None, verify=True):
        self.model = model
        self.grid = grid
        bcs = {} if bcs is None else dict(bcs)
        unknown = set(bcs) - set(EDGES)
        if unknown:
            raise ValueError(f"unknown edges {sorted(unknown)}")
        self.bcs = {e: bcs.get(e) for e in EDGES}
        for e, bc in self.bcs.items():
            if bc is not None and bc.mode != "weak":
                raise ValueError(f"edge {e}: the solver imposes boundary conditions weakly only")
        self.node_overrides = dict(node_overrides or {})
        self.theta = float(model.split_factor)
        self.DC = build_lifting_map(grid, model.n_vars)
        X, Y = grid.coordinates()
        self.positions = np.stack([X, Y])
        self.bnd_positions = grid.boundary_positions()
        if verify:
            resid = self.block_commutation_residual()
            if resid >= COMMUTE_TOL:
                raise AssertionError(f"(I (x) P_vol) does not commute with block coefficients: {resid}")

    @property
    def homogeneous(self):
        return all(bc is None or bc.homogeneous for bc in self.all_conditions())

    def all_conditions(self):
        return list(self.bcs.values()) + list(self.node_overrides.values())

    def condition(self, j):
        if j in self.node_overrides:
            return self.node_overrides[j]
        return self.bcs[self.grid.edges[j]]

    def block_coefficients(self, U):
        """Block matrices with nodal coefficient values on the block diagonals."""
        U = _flat(U, self.model.n_vars)
        mats = self.model.coefficients(U, position=self.positions)
        n = self.model.n_vars
        return tuple(
            sp.bmat([[sp.diags(M[a, b]) for b in range(n)] for a in range(n)], format="csr")
            for M in mats
        )

    def block_commutation_residual(self, U=None, seed=0):
        rng = np.random.default_rng(seed)
        n, M = self.model.n_vars, self.grid.M
        if U is None:
            U = np.ones((n, M)) + 0.1 * rng.random((n, M))
        Pv = sp.kron(sp.identity(n), self.grid.P_vol)
        v = rng.standard_normal(n * M)
        resid = 0.0
        for blk in self.block_coefficients(U):
            r = Pv @ (blk @ v) - blk @ (Pv @ v)
            resid = max(resid, float(np.max(np.abs(r))))
        return resid

    def node_terms(self, U_b, j, t, bc=None):
        """Boundary split, flux and penalty at boundary entry ``j``."""
        bc = self.condition(j) if bc is None else bc
        normal = self.grid.normals[j]
        pos = self.bnd_positions[j]
        model = self.model
        n = model.n_vars
        formulation = model.default_formulation(U_b, normal) if bc is None else resolve_formulation(
            bc, model, U_b, normal
        )
        try:
            split = model.split(U_b, normal, formulation)
        except DegenerateRotation:
            split = None
        if split is None:
            # glancing node: no conditions, flux taken in original variables
            M = model.normal_flux_matrix(U_b, normal)
            return NodeTerms(glancing_split(n, formulation), float(U_b @ M @ U_b), 0.0, np.zeros(n), 0.0)
        flux = split.quadratic_form()
        if bc is None or split.n_minus == 0:
            return NodeTerms(split, flux, 0.0, np.zeros(n), 0.0)
        total = boundary_flux_from_split(split, bc, pos, t, mode="weak")
        pen = penalty_from_split(split, bc, pos, t)
        G = bc.data(split, pos, t)
        return NodeTerms(split, flux, total - flux, pen, float(G @ G))

    def boundary_terms(self, U, t):
        U = _flat(U, self.model.n_vars)
        Ub = U[:, self.grid.boundary_nodes]
        return [self.node_terms(Ub[:, j], j, t) for j in range(self.grid.N)]


def _flat(U, n):
    if isinstance(U, StateField):
        U = U.values
    U = np.asarray(U, dtype=float)
    return U.reshape(n, -1)


def _check_state(system, U):
    try:
        system.model.check_admissible(U)
    except SkewBCError as exc:
        nx = system.grid.nx
        loc = getattr(exc, "location", None)
        if isinstance(loc, str) and loc.startswith("node "):
            k = int(loc.split()[1])
            raise ConstraintViolation(exc.component, exc.value, f"node {k} (i={k % nx}, j={k // nx})") from exc
        raise


def interior_rhs(U, system, t=0.0, matrix_free=True):
    """``-[theta (D_i A_i U + A_i^T D_i U) + C U]`` on an ``(n, M)`` state."""
    g = system.grid
    n = system.model.n_vars
    U = _flat(U, n)
    A, B, C = system.model.coefficients(U, position=system.positions)
    AU = np.einsum("abm,bm->am", A, U)
    BU = np.einsum("abm,bm->am", B, U)
    if matrix_free:
        shape = (n, g.ny, g.nx)
        dx = lambda V: g.apply_dx(V.reshape(shape)).reshape(n, -1)  # noqa: E731
        dy = lambda V: g.apply_dy(V.reshape(shape)).reshape(n, -1)  # noqa: E731
    else:
        dx = lambda V: (g.Dx @ V.T).T  # noqa: E731
        dy = lambda V: (g.Dy @ V.T).T  # noqa: E731
    DxU, DyU = dx(U), dy(U)
    skew = dx(AU) + np.einsum("bam,bm->am", A, DxU) + dy(BU) + np.einsum("bam,bm->am", B, DyU)
    return -(system.theta * skew + np.einsum("abm,bm->am", C, U))


def lifting_term(terms, system):
    """``theta * L_D`` in ``(n, M)`` layout from per-node penalties."""
    n = system.model.n_vars
    stack = np.concatenate([tt.penalty for tt in terms]) if terms else np.zeros(0)
    vol = (system.DC @ stack).reshape(n, -1)
    return system.theta * vol / system.grid.weights


def assemble_rhs(U, system, t=0.0, matrix_free=True, terms=None):
    """Return ``(P (x) I) U_t`` with shape ``(n, ny, nx)``."""
    n = system.model.n_vars
    Uf = _flat(U, n)
    _check_state(system, Uf)
    if terms is None:
        terms = system.boundary_terms(Uf, t)
    out = interior_rhs(Uf, system, t, matrix_free) - lifting_term(terms, system)
    return out.reshape(n, system.grid.ny, system.grid.nx)


def energy(U, system):
    return total_energy(_flat(U, system.model.n_vars), system.model, system.grid.weights)


def _weighted_inner(U, V, system):
    return float(np.sum((U * V) @ system.grid.weights))


@dataclass
class RateIdentity:
    lhs: float
    rhs: float
    residual: float
    boundary_flux: float
    data_rate: float

    @property
    def passed(self):
        return self.residual <= IDENTITY_RTOL * (1.0 + abs(self.rhs))


def _rate_identity(Uf, system, t, matrix_free=True):
    n = system.model.n_vars
    terms = system.boundary_terms(Uf, t)
    rate = assemble_rhs(Uf, system, t, matrix_free, terms).reshape(n, -1)
    lhs = 2.0 * _weighted_inner(Uf, rate, system)
    ds = system.grid.ds
    bflux = float(np.dot([tt.flux + tt.penalty_flux for tt in terms], ds))
    data_rate = 2.0 * float(np.dot([tt.data_sq for tt in terms], ds))
    rhs = -2.0 * system.theta * bflux
    return rate, RateIdentity(lhs, rhs, abs(lhs - rhs), bflux, data_rate)


def energy_rate_identity(U, system, t=0.0, matrix_free=True):
    """Compare ``d/dt ||U||^2`` from the scheme with the boundary quadrature.

    ``lhs = 2 U^T (I (x) P_vol) (P (x) I) U_t`` and
    ``rhs = -2 theta sum_j [W^T Lambda W + 2 (W^-)^T Sigma (...)]_j ds_j``.
    ``data_rate`` is ``2 sum_j (G^T G)_j ds_j``.
    """
    return _rate_identity(_flat(U, system.model.n_vars), system, t, matrix_free)[1]


def entropy_audit(U, system, t=0.0):
    """Entropy bookkeeping with ``S = U^T P U / 2``.

    ``dSdt_plus_flux_residual`` is ``d/dt sum S w + theta sum_j F_n ds_j``
    (penalty excluded): zero when no penalty acts.  ``interior_production``
    drops the lifting term from the scheme and must vanish for any state.
    """
    n = system.model.n_vars
    Uf = _flat(U, n)
    terms = system.boundary_terms(Uf, t)
    rate = assemble_rhs(Uf, system, t, terms=terms).reshape(n, -1)
    dSdt = _weighted_inner(Uf, rate, system)
    ds = system.grid.ds
    Ub = Uf[:, system.grid.boundary_nodes]
    fluxes = []
    for j in range(system.grid.N):
        M = system.model.normal_flux_matrix(Ub[:, j], system.grid.normals[j])
        fluxes.append(float(Ub[:, j] @ M @ Ub[:, j]))
    flux_quad = system.theta * float(np.dot(fluxes, ds))
    pen = system.theta * float(np.dot([tt.penalty_flux for tt in terms], ds))
    interior = _weighted_inner(Uf, interior_rhs(Uf, system, t), system) + flux_quad
    scale = 1.0 + abs(flux_quad)
    return {
        "dSdt_plus_flux_residual": abs(dSdt + flux_quad),
        "interior_production": abs(interior),
        "penalty_contribution": pen,
        "scale": scale,
    }


@dataclass
class EnergyLedger:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    boundary_flux: list = field(default_factory=list)
    data_integral: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    tolerances: list = field(default_factory=list)
    max_identity_residual: float = 0.0
    homogeneous: bool = True

    def record(self, t, E, bflux, data, ok, tol):
        self.times.append(float(t))
        self.energy.append(float(E))
        self.boundary_flux.append(float(bflux))
        self.data_integral.append(float(data))
        self.verdicts.append(bool(ok))
        self.tolerances.append(float(tol))

    @property
    def all_passed(self):
        return all(self.verdicts)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "energy", "boundary_flux", "data_integral", "bound_satisfied"])
            for row in zip(self.times, self.energy, self.boundary_flux, self.data_integral, self.verdicts):
                w.writerow([repr(row[0]), repr(row[1]), repr(row[2]), repr(row[3]), int(row[4])])


def cfl_dt(system, U, cfl=0.5):
    """``cfl * h / max wave speed``; the wave speed estimate is heuristic."""
    speed = system.model.wave_speed(_flat(U, system.model.n_vars))
    return cfl * system.grid.h_min / max(speed, 1e-300)


def spectral_radius_estimate(system, U, t=0.0, iters=30, seed=0):
    """Power-iteration estimate of the spectral radius of ``dU_t/dU``."""
    n = system.model.n_vars
    Uf = _flat(U, n)
    Pinv = 1.0 / np.diag(system.model.P)
    f0 = Pinv[:, None] * assemble_rhs(Uf, system, t).reshape(n, -1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(Uf.shape)
    v /= np.linalg.norm(v)
    eps = 1e-7 * max(1.0, float(np.max(np.abs(Uf))))
    rho = 0.0
    for _ in range(iters):
        f1 = Pinv[:, None] * assemble_rhs(Uf + eps * v, system, t).reshape(n, -1)
        Jv = (f1 - f0) / eps
        rho = float(np.linalg.norm(Jv))
        if rho == 0.0:
            break
        v = Jv / rho
    return rho


def stable_dt(system, U, cfl=0.5, t=0.0):
    """Smaller of the CFL step and a penalty-aware step from the Jacobian radius."""
    dt = cfl_dt(system, U, cfl)
    rho = spectral_radius_estimate(system, U, t)
    if rho > 0:
        dt = min(dt, cfl * RK4_STABILITY / rho)
    return dt


def _require_invertible_P(model):
    d = np.diag(model.P)
    if not np.allclose(model.P, np.diag(d)) or np.any(d <= 0):
        raise ValueError(
            f"{model.name}: P is singular, the semi-discrete system is differential-algebraic "
            "and cannot be advanced in time"
        )
    return 1.0 / d


def rk4_advance(U, system, dt, n_steps, ledger: Optional[EnergyLedger] = None, t0=None,
                cfl=0.5, check_identity=False):
    """Advance with classical RK4 and certify the energy bounds every step.

    Homogeneous data: ``E(t) <= E(0) + tol_t``.  Otherwise
    ``E(t) <= E(0) + 2 int sum_j (G^T G)_j ds_j dt + tol_t`` with the data
    integral advanced by the same RK4 stages.  ``tol_t = 10 dt^4 max|rate|``.
    """
    Pinv = _require_invertible_P(system.model)
    n = system.model.n_vars
    field_ = U if isinstance(U, StateField) else StateField(np.asarray(U, dtype=float))
    if ledger is None:
        ledger = EnergyLedger()
    ledger.homogeneous = system.homogeneous
    t = field_.time if t0 is None else float(t0)
    if n_steps == 0 or dt == 0:
        return field_.copy(), ledger
    if dt < 0 or n_steps < 0:
        raise ValueError("dt and n_steps must be nonnegative")
    limit = cfl_dt(system, field_.values, cfl)
    if dt > limit:
        warnings.warn(f"dt={dt:.3e} exceeds the CFL estimate {limit:.3e}", RuntimeWarning, stacklevel=2)

    shape = field_.values.shape
    Ucur = field_.values.reshape(n, -1).copy()
    E0 = energy(Ucur, system)
    max_rate = 0.0

    def stage(Us, ts):
        nonlocal max_rate
        try:
            _check_state(system, Us)
        except SkewBCError as exc:
            raise AdmissibilityLoss(
                f"admissibility lost at t={ts:.6g}: {exc}",
                snapshot=StateField(Us.reshape(shape).copy(), ts),
                ledger=ledger,
            ) from exc
        rate, ident = _rate_identity(Us, system, ts)
        if check_identity:
            ledger.max_identity_residual = max(
                ledger.max_identity_residual, ident.residual / (1.0 + abs(ident.rhs))
            )
        rate = Pinv[:, None] * rate
        max_rate = max(max_rate, abs(ident.lhs))
        return rate, ident

    k1, id1 = stage(Ucur, t)
    data = 0.0
    ledger.record(t, E0, id1.boundary_flux, data, True, 0.0)
    for _ in range(n_steps):
        if ledger.times[-1] != t:
            k1, id1 = stage(Ucur, t)
        k2, id2 = stage(Ucur + 0.5 * dt * k1, t + 0.5 * dt)
        k3, id3 = stage(Ucur + 0.5 * dt * k2, t + 0.5 * dt)
        k4, id4 = stage(Ucur + dt * k3, t + dt)
        Ucur = Ucur + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        data += dt / 6.0 * (id1.data_rate + 2 * id2.data_rate + 2 * id3.data_rate + id4.data_rate)
        t = t + dt
        k1, id1 = stage(Ucur, t)
        E = energy(Ucur, system)
        tol = 10.0 * dt**4 * max_rate
        bound = E0 + tol + (0.0 if ledger.homogeneous else data)
        ledger.record(t, E, id1.boundary_flux, data, E <= bound, tol)
    return StateField(Ucur.reshape(shape), t), ledger
