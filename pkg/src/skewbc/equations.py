"""Incompressible Euler, shallow water and compressible Euler models."""
from __future__ import annotations

import numpy as np

from .boundary import U_TOL, CharSplit, rotate_boundary_state
from .core import DegenerateRotation, SkewSystem


def _rotation(normal):
    """Map Cartesian velocity components to (normal, tangential)."""
    n1, n2 = normal
    return np.array([[n1, n2], [-n2, n1]])


def _embed(rot, n, first):
    N = np.eye(n)
    N[first:first + 2, first:first + 2] = rot
    return N


class IeeModel(SkewSystem):
    """2D incompressible Euler equations, state ``(u, v, p)``.

    ``p`` is the pressure divided by the constant density.  The split form
    carries a factor 1/2 in front of the symmetric flux matrices, so
    ``split_factor = 0.5``.  ``P`` is singular: the energy only measures
    the velocities.
    """

    name = "iee"
    n_vars = 3
    split_factor = 0.5
    components = ("u", "v", "p")
    positive_components = ()
    formulations = ("standard", "sqrt_p")

    def __init__(self):
        self.P = np.diag([1.0, 1.0, 0.0])

    def coefficients(self, U, position=None):
        U = np.asarray(U, dtype=float)
        u, v = U[0], U[1]
        z = np.zeros_like(u)
        o = np.ones_like(u)
        A = np.array([[u, z, o], [z, u, z], [o, z, z]])
        B = np.array([[v, z, z], [z, v, o], [z, o, z]])
        C = np.zeros_like(A)
        return A, B, C

    def normal_velocity(self, U, normal):
        return normal[0] * U[0] + normal[1] * U[1]

    def reference_speed(self, U):
        return max(1.0, float(np.hypot(U[0], U[1])))

    def wave_speed(self, U):
        U = np.asarray(U, dtype=float)
        return float(np.max(np.abs(U[0]) + np.abs(U[1])))

    def split(self, U, normal, formulation="standard"):
        N = _embed(_rotation(normal), 3, 0)
        un, ut, p = N @ U
        if formulation == "standard":
            if abs(un) < U_TOL * self.reference_speed(U):
                raise DegenerateRotation(f"|u_n|={abs(un):.3e} below tolerance")
            W = np.array([un + p / un, ut, p / un])
            lam = np.array([un, un, -un])
            T_inv = np.array([[1.0, 0.0, 1.0 / un], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0 / un]]) @ N
        elif formulation == "sqrt_p":
            # diagnostics only: needs p > 0 and is not used by the solver
            if not p > 0:
                raise DegenerateRotation("sqrt_p formulation needs p > 0")
            sp = np.sqrt(p)
            W = np.array([un, ut, sp])
            lam = np.array([un, un, 2.0 * un])
            T_inv = np.diag([1.0, 1.0, 1.0 / sp]) @ N
        else:
            raise ValueError(f"unknown IEE formulation {formulation!r}")
        return CharSplit(W, lam, T_inv, formulation, aux={"normal": np.asarray(normal, dtype=float), "u_n": un})

    def default_formulation(self, U, normal):
        return "standard"

    def dirichlet_R(self, split):
        # Dirichlet on (u_n, u_tau) at inflow: W^- - R W^+ = (u_n, u_tau)
        if split.formulation_id == "standard" and list(split.minus) == [0, 1]:
            return np.array([[1.0], [0.0]])
        return np.zeros((split.n_minus, split.n_plus))


class SweModel(SkewSystem):
    """2D shallow water equations in the scaled variables ``(phi, sqrt(phi) u, sqrt(phi) v)``.

    ``alpha`` and ``beta`` select a member of the two-parameter family of
    skew-symmetric splittings.  The Coriolis parameter is ``f0 + f_beta * y``.
    """

    name = "swe"
    n_vars = 3
    split_factor = 1.0
    components = ("phi", "sqrt(phi)u", "sqrt(phi)v")
    positive_components = (0,)
    formulations = ("u_form", "w_form")

    def __init__(self, alpha=0.2, beta=0.2, f0=0.0, f_beta=0.0):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.f0 = float(f0)
        self.f_beta = float(f_beta)
        self.P = np.eye(3)

    @property
    def params(self):
        return {"alpha": self.alpha, "beta": self.beta, "f0": self.f0, "f_beta": self.f_beta}

    def coriolis(self, position=None):
        if position is None or self.f_beta == 0.0:
            return self.f0
        return self.f0 + self.f_beta * np.asarray(position[1], dtype=float)

    def coefficients(self, U, position=None):
        U = np.asarray(U, dtype=float)
        a, b = self.alpha, self.beta
        s = np.sqrt(U[0])
        u, v = U[1] / s, U[2] / s
        z = np.zeros_like(s)
        A = np.array([
            [a * u, (1 - 3 * a) * s, z],
            [2 * a * s, 0.5 * u, z],
            [z, z, 0.5 * u],
        ])
        B = np.array([
            [b * v, z, (1 - 3 * b) * s],
            [z, 0.5 * v, z],
            [2 * b * s, z, 0.5 * v],
        ])
        f = self.coriolis(position) + z
        C = np.array([[z, z, z], [z, z, -f], [z, f, z]])
        return A, B, C

    def normal_velocity(self, U, normal):
        return (normal[0] * U[1] + normal[1] * U[2]) / np.sqrt(U[0])

    def reference_speed(self, U):
        s = np.sqrt(U[0])
        return float(np.hypot(U[1], U[2]) / s + s)

    def wave_speed(self, U):
        U = np.asarray(U, dtype=float)
        s = np.sqrt(U[0])
        return float(np.max((np.abs(U[1]) + np.abs(U[2])) / s + s))

    def split(self, U, normal, formulation):
        N = _embed(_rotation(normal), 3, 1)
        U1, Un, Ut = N @ U
        s = np.sqrt(U1)
        un = Un / s
        if formulation == "u_form":
            W = np.array([U1, Un, Ut])
            lam = np.array([un, 0.5 * un, 0.5 * un])
            T_inv = N
        elif formulation == "w_form":
            if abs(un) < U_TOL * self.reference_speed(U):
                raise DegenerateRotation(f"|U_n|={abs(Un):.3e} below tolerance")
            c = 1.0 / (2.0 * Un * s)
            W = np.array([U1 * U1, U1 * U1 + Un * Un, Un * Ut])
            lam = np.array([-c, c, c])
            # W is quadratic in U: T^{-1} is half its Jacobian
            T_inv = np.array([[U1, 0.0, 0.0], [U1, Un, 0.0], [0.0, 0.5 * Ut, 0.5 * Un]]) @ N
        else:
            raise ValueError(f"unknown SWE formulation {formulation!r}")
        return CharSplit(W, lam, T_inv, formulation, aux={"normal": np.asarray(normal, dtype=float), "u_n": un, "U_n": Un})

    def default_formulation(self, U, normal):
        return "w_form" if self.normal_velocity(U, normal) < 0 else "u_form"

    def dirichlet_R(self, split):
        # Dirichlet on (U_n, U_tau) at inflow: W^- - R W^+ = (U_n^2, U_n U_tau)
        if split.formulation_id == "w_form" and list(split.minus) == [1, 2]:
            return np.array([[1.0], [0.0]])
        return np.zeros((split.n_minus, split.n_plus))

    def from_primitive(self, prim):
        phi, u, v = np.asarray(prim, dtype=float)
        s = np.sqrt(phi)
        return np.array([phi, s * u, s * v])

    def to_primitive(self, U):
        U = np.asarray(U, dtype=float)
        s = np.sqrt(U[0])
        return np.array([U[0], U[1] / s, U[2] / s])


def psi(mach2, gamma):
    """Factor modulating the fourth boundary eigenvalue, a function of ``M_n^2``."""
    return 1.0 - 2.0 * (gamma - 1.0) / (gamma * (2.0 - gamma)) / mach2


def psi_switch_mach2(gamma):
    """``M_n^2`` where :func:`psi` changes sign, ``2 (gamma - 1) / (gamma (2 - gamma))``."""
    return 2.0 * (gamma - 1.0) / (gamma * (2.0 - gamma))


class CeeModel(SkewSystem):
    """2D compressible Euler equations in ``(sqrt(rho), sqrt(rho) u, sqrt(rho) v, sqrt(p))``.

    The flux matrices are stored without the leading 1/2 of the split form;
    ``split_factor = 0.5`` restores it.
    """

    name = "cee"
    n_vars = 4
    split_factor = 0.5
    components = ("sqrt(rho)", "sqrt(rho)u", "sqrt(rho)v", "sqrt(p)")
    positive_components = (0, 3)
    formulations = ("diagonal", "contracted")

    def __init__(self, gamma=1.4):
        gamma = float(gamma)
        if not 1.0 < gamma < 2.0:
            raise ValueError(f"gamma must lie in (1, 2), got {gamma}")
        self.gamma = gamma
        k = 0.5 * (gamma - 1.0)
        self.P = np.diag([1.0, k, k, 1.0])

    @property
    def params(self):
        return {"gamma": self.gamma}

    def coefficients(self, U, position=None):
        U = np.asarray(U, dtype=float)
        g = self.gamma
        k = 0.5 * (g - 1.0)
        u, v = U[1] / U[0], U[2] / U[0]
        q = 2.0 * (g - 1.0) * U[3] / U[0]
        z = np.zeros_like(u)
        A = np.array([
            [u, z, z, z],
            [z, k * u, z, z],
            [z, z, k * u, z],
            [z, q, z, (2 - g) * u],
        ])
        B = np.array([
            [v, z, z, z],
            [z, k * v, z, z],
            [z, z, k * v, z],
            [z, z, q, (2 - g) * v],
        ])
        return A, B, np.zeros_like(A)

    def normal_velocity(self, U, normal):
        return (normal[0] * U[1] + normal[1] * U[2]) / U[0]

    def sound_speed(self, U):
        return np.sqrt(self.gamma) * U[3] / U[0]

    def reference_speed(self, U):
        return float(np.hypot(U[1], U[2]) / U[0] + self.sound_speed(U))

    def wave_speed(self, U):
        U = np.asarray(U, dtype=float)
        return float(np.max((np.abs(U[1]) + np.abs(U[2])) / U[0] + self.sound_speed(U)))

    def normal_mach2(self, U, normal):
        un = self.normal_velocity(U, normal)
        return un * un / self.sound_speed(U) ** 2

    def split(self, U, normal, formulation):
        g = self.gamma
        k = 0.5 * (g - 1.0)
        N = _embed(_rotation(normal), 4, 1)
        p1, pn, pt, p4 = N @ U
        un = pn / p1
        if formulation == "contracted":
            W = np.array([p1, pn, pt, p4])
            lam = un * np.array([1.0, k, k, g])
            T_inv = N
        elif formulation == "diagonal":
            if abs(un) < U_TOL * self.reference_speed(U):
                raise DegenerateRotation(f"|u_n|={abs(un):.3e} below tolerance")
            mach2 = pn * pn / (g * p4 * p4)
            lam4 = (2.0 - g) * un * psi(mach2, g)
            W = np.array([p1, pn + 2.0 * p4 * p4 / pn, pt, p4])
            lam = np.array([un, k * un, k * un, lam4])
            S = np.eye(4)
            S[1, 3] = 2.0 * p4 / pn
            T_inv = S @ N
        else:
            raise ValueError(f"unknown CEE formulation {formulation!r}")
        return CharSplit(W, lam, T_inv, formulation, aux={"normal": np.asarray(normal, dtype=float), "u_n": un, "phi_n": pn, "phi_4": p4})

    def default_formulation(self, U, normal):
        return "diagonal" if self.normal_velocity(U, normal) < 0 else "contracted"

    def dirichlet_R(self, split):
        # Dirichlet on (phi_1, phi_2, phi_3) at subsonic inflow
        if split.formulation_id == "diagonal" and list(split.minus) == [0, 1, 2]:
            return np.array([[0.0], [2.0 * split.aux["phi_4"] / split.aux["phi_n"]], [0.0]])
        return np.zeros((split.n_minus, split.n_plus))

    def from_primitive(self, prim):
        rho, u, v, p = np.asarray(prim, dtype=float)
        s = np.sqrt(rho)
        return np.array([s, s * u, s * v, np.sqrt(p)])

    def to_primitive(self, U):
        U = np.asarray(U, dtype=float)
        return np.array([U[0] ** 2, U[1] / U[0], U[2] / U[0], U[3] ** 2])


MODELS = {"iee": IeeModel, "swe": SweModel, "cee": CeeModel}


def iee_char_split(U, normal, formulation="standard"):
    return rotate_boundary_state(U, normal, IeeModel(), formulation)


def swe_boundary_forms(U, normal, model=None):
    """Both SWE boundary formulations at one node.

    ``w_form`` is ``None`` where the normal velocity vanishes.
    """
    model = SweModel() if model is None else model
    u_form = rotate_boundary_state(U, normal, model, "u_form")
    try:
        w_form = rotate_boundary_state(U, normal, model, "w_form")
    except DegenerateRotation:
        w_form = None
    return {"u_form": u_form, "w_form": w_form}


def cee_char_split(Phi, normal, use_contracted=False, gamma=1.4, model=None):
    model = CeeModel(gamma) if model is None else model
    return rotate_boundary_state(Phi, normal, model, "contracted" if use_contracted else "diagonal")


def count_required_bcs(model, state, normal, formulation_id=None):
    """Number of negative boundary eigenvalues for the chosen formulation."""
    return rotate_boundary_state(state, normal, model, formulation_id).n_minus
