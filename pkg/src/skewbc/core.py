"""Skew-symmetric hyperbolic systems and their energy functionals.

A system is written as

    P U_t + theta * [(A_i U)_{x_i} + A_i^T U_{x_i}] + C U = 0,

with ``P`` symmetric positive semi-definite and ``C`` antisymmetric.  The
flux matrices ``A_i`` are stored in the normalization used for boundary
analysis, so that ``U^T (n_i A_i) U`` is the boundary quadratic form that is
rotated to ``W^T Lambda W``.  ``theta`` (``split_factor``) carries the
remaining scalar: it is 1/2 for models whose split form has a leading 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POSITIVITY_THRESHOLD = 1e-12
SKEW_TOL = 1e-13


class SkewBCError(Exception):
    """Base class for errors raised by this package."""


class ConstraintViolation(SkewBCError, ValueError):
    """A state violates a model positivity constraint."""

    def __init__(self, component, value, location=None):
        self.component = component
        self.value = value
        self.location = location
        where = "" if location is None else f" at {location}"
        super().__init__(f"positivity constraint violated for {component}={value!r}{where}")


class DimensionError(SkewBCError, ValueError):
    pass


class NormalizationError(SkewBCError, ValueError):
    pass


class DegenerateRotation(SkewBCError, ArithmeticError):
    """The boundary rotation divides by a (numerically) vanishing speed."""


class SkewSystem:
    """Base class for equation models.

    Subclasses set ``n_vars``, ``P``, ``split_factor``, ``components``,
    ``positive_components`` and implement :meth:`coefficients`.  Coefficient
    evaluation is vectorized: a state of shape ``(n_vars, ...)`` gives
    matrices of shape ``(n_vars, n_vars, ...)``.
    """

    name = "abstract"
    n_vars: int
    dim = 2
    P: np.ndarray
    split_factor = 1.0
    components: tuple = ()
    positive_components: tuple = ()
    formulations: tuple = ()

    @property
    def params(self):
        return {}

    def coefficients(self, U, position=None):
        """Return ``(A, B, C)`` evaluated at ``U`` (coefficient state V = U)."""
        raise NotImplementedError

    def frozen_coefficients(self, V):
        """Coefficients at a frozen state ``V`` (linearized diagnostics only)."""
        return self.coefficients(np.asarray(V, dtype=float))

    def normal_flux_matrix(self, U, normal):
        A, B, _ = self.coefficients(U)
        return normal[0] * A + normal[1] * B

    def check_admissible(self, U, location=None):
        U = np.asarray(U, dtype=float)
        if not np.all(np.isfinite(U)):
            raise ConstraintViolation("all", "non-finite", location)
        for k in self.positive_components:
            vals = np.atleast_1d(U[k])
            bad = np.flatnonzero(~(vals > POSITIVITY_THRESHOLD))
            if bad.size:
                loc = location
                if loc is None and vals.size > 1:
                    loc = f"node {int(bad[0])}"
                raise ConstraintViolation(self.components[k], float(vals[bad[0]]), loc)

    def normal_velocity(self, U, normal):
        raise NotImplementedError

    def wave_speed(self, U):
        """Heuristic max signal speed over the nodes of ``U``."""
        raise NotImplementedError

    def reference_speed(self, U):
        return 1.0

    def split(self, U, normal, formulation):
        raise NotImplementedError

    def default_formulation(self, U, normal):
        return self.formulations[0]

    def dirichlet_R(self, split):
        """Coupling matrix for the model's Dirichlet-type condition at ``split``."""
        return np.zeros((split.n_minus, split.n_plus))

    def from_primitive(self, prim):
        return np.asarray(prim, dtype=float)

    def to_primitive(self, U):
        return np.asarray(U, dtype=float)


@dataclass
class StateField:
    """Component-major nodal state: ``values`` has shape ``(n_vars, ny, nx)``."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise DimensionError("StateField values must have shape (n_vars, ny, nx)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("StateField contains non-finite entries")

    @property
    def grid_shape(self):
        return self.values.shape[1:]

    @property
    def n_vars(self):
        return self.values.shape[0]

    def flat(self):
        """Return an ``(n_vars, M)`` view with x varying fastest."""
        return self.values.reshape(self.n_vars, -1)

    def copy(self):
        return StateField(self.values.copy(), self.time)


@dataclass
class SkewReport:
    c_skew_residual: float
    p_symmetry_residual: float
    passed: bool = field(default=False)

    @property
    def pass_(self):
        return self.passed


def verify_skew_conditions(system, samples):
    """Check ``C + C^T = 0`` and ``P = P^T`` over sampled states."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise ValueError("at least one sample state is required")
    P = np.asarray(system.P, dtype=float)
    p_res = float(np.max(np.abs(P - P.T)))
    c_res = 0.0
    for s in samples:
        system.check_admissible(s)
        _, _, C = system.coefficients(s)
        c_res = max(c_res, float(np.max(np.abs(C + C.T))))
    return SkewReport(c_res, p_res, c_res < SKEW_TOL and p_res < SKEW_TOL)


def total_energy(field_, system, quadrature):
    """Discrete energy ``sum_nodes (U^T P U)_node * w_node``.

    ``quadrature`` holds the volume weights, either with the grid shape or
    flattened in the same (x fastest) node order.
    """
    values = field_.values if isinstance(field_, StateField) else np.asarray(field_, dtype=float)
    n = values.shape[0]
    if n != system.n_vars:
        raise DimensionError(f"state has {n} components, model expects {system.n_vars}")
    U = values.reshape(n, -1)
    w = np.asarray(quadrature, dtype=float).reshape(-1)
    if w.size != U.shape[1]:
        raise DimensionError(f"quadrature has {w.size} weights for {U.shape[1]} nodes")
    density = np.einsum("am,ab,bm->m", U, np.asarray(system.P, dtype=float), U)
    return float(np.dot(density, w))


def entropy_density(U, system):
    U = np.asarray(U, dtype=float)
    return 0.5 * np.einsum("a...,ab,b...->...", U, system.P, U)


def _unit(normal):
    normal = np.asarray(normal, dtype=float)
    if normal.shape != (2,):
        raise NormalizationError("normal must be a 2-vector")
    if abs(np.hypot(normal[0], normal[1]) - 1.0) > 1e-12:
        raise NormalizationError(f"normal {normal.tolist()} is not a unit vector")
    return normal


def entropy_flux(U, system, normal):
    """Normal entropy flux ``U^T (n_i A_i(U)) U`` in boundary normalization.

    The entropy density ``S = U^T P U / 2`` satisfies
    ``S_t + split_factor * (U^T A_i U)_{x_i} = 0`` for smooth solutions.
    """
    normal = _unit(normal)
    U = np.asarray(U, dtype=float)
    system.check_admissible(U)
    M = system.normal_flux_matrix(U, normal)
    return float(U @ M @ U)


def symmetrized_flux(U, system, normal):
    """``U^T * sym(n_i A_i) * U``; equal to :func:`entropy_flux` by construction."""
    M = system.normal_flux_matrix(np.asarray(U, dtype=float), _unit(normal))
    return float(U @ (0.5 * (M + M.T)) @ U)
