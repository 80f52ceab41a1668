"""Characteristic splitting, general nonlinear boundary conditions and penalties.

A boundary condition prescribes the incoming rotated variables in terms of
the outgoing ones and data,

    W^- = R W^+ + S^{-1} G,    S = S_tilde^{-1} |Lambda^-|^{1/2},

and is imposed weakly through the penalty ``2 (J^- T^{-1})^T Sigma (...)``
with ``Sigma = |Lambda^-|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import DimensionError, SkewBCError, _unit

LAMBDA_TOL = 1e-13  # relative to max |lambda|
U_TOL = 1e-8  # relative to the model reference speed
STRICT_TOL = 1e-10  # relative to max Lambda^+
PSD_TOL = 1e-12
DEFAULT_S_TILDE = 0.5


class InadmissibleBoundaryCondition(SkewBCError, ValueError):
    pass


class SingularSTilde(SkewBCError, np.linalg.LinAlgError):
    pass


@dataclass
class CharSplit:
    """Rotated boundary state ``W = T^{-1} U`` with diagonal ``Lambda``.

    ``T_inv`` is evaluated at the coefficient state, so ``W = T_inv @ U``
    holds exactly.  ``plus``/``minus`` are index arrays into ``W``.
    """

    W: np.ndarray
    lam: np.ndarray
    T_inv: np.ndarray
    formulation_id: str
    plus: np.ndarray = field(default=None)
    minus: np.ndarray = field(default=None)
    glancing: bool = False
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.plus is None or self.minus is None:
            self.plus, self.minus = sign_split(self.lam)

    @property
    def Lambda(self):
        return np.diag(self.lam)

    @property
    def n_plus(self):
        return len(self.plus)

    @property
    def n_minus(self):
        return len(self.minus)

    @property
    def J_plus(self):
        return np.eye(len(self.lam))[self.plus]

    @property
    def J_minus(self):
        return np.eye(len(self.lam))[self.minus]

    @property
    def W_plus(self):
        return self.W[self.plus]

    @property
    def W_minus(self):
        return self.W[self.minus]

    @property
    def lam_plus(self):
        return self.lam[self.plus]

    @property
    def abs_lam_minus(self):
        return np.abs(self.lam[self.minus])

    def quadratic_form(self):
        return float(np.dot(self.lam, self.W**2))


def sign_split(lam, tol=LAMBDA_TOL):
    lam = np.asarray(lam, dtype=float)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    negative = lam < -tol * scale
    return np.flatnonzero(~negative), np.flatnonzero(negative)


def glancing_split(n_vars, formulation_id):
    """Split for a node with vanishing normal speed: no conditions imposed."""
    return CharSplit(
        W=np.zeros(n_vars),
        lam=np.zeros(n_vars),
        T_inv=np.zeros((n_vars, n_vars)),
        formulation_id=formulation_id,
        plus=np.arange(n_vars),
        minus=np.array([], dtype=int),
        glancing=True,
    )


RSpec = Union[None, np.ndarray, Callable[[CharSplit], np.ndarray]]
STildeSpec = Union[None, float, np.ndarray]
# G(position, t, split) -> array with split.n_minus entries
GSpec = Optional[Callable[[np.ndarray, float, CharSplit], np.ndarray]]


@dataclass
class BoundaryCondition:
    """``S (W^- - R W^+) = G`` at one boundary face.

    ``R`` may be a fixed ``|Lambda^-| x |Lambda^+|`` matrix or a callable of
    the split (state dependent couplings).  ``S_tilde`` may be a scalar
    (times identity) or a matrix.  ``G=None`` means homogeneous data.
    ``Sigma`` is not stored: it is always ``|Lambda^-|`` of the local state.
    """

    R: RSpec = None
    S_tilde: STildeSpec = DEFAULT_S_TILDE
    G: GSpec = None
    mode: str = "weak"
    formulation: Union[str, tuple] = "auto"
    kind: str = "characteristic"

    def __post_init__(self):
        if self.mode not in ("weak", "strong"):
            raise ValueError(f"mode must be 'weak' or 'strong', got {self.mode!r}")

    @property
    def homogeneous(self):
        return self.G is None

    def R_matrix(self, split):
        if self.R is None:
            R = np.zeros((split.n_minus, split.n_plus))
        elif callable(self.R):
            R = np.asarray(self.R(split), dtype=float)
        else:
            R = np.asarray(self.R, dtype=float)
        if R.size == split.n_minus * split.n_plus:
            R = R.reshape(split.n_minus, split.n_plus)
        if R.shape != (split.n_minus, split.n_plus):
            raise DimensionError(
                f"R has shape {R.shape}, split needs {(split.n_minus, split.n_plus)}"
            )
        return R

    def S_tilde_matrix(self, split):
        m = split.n_minus
        if self.S_tilde is None:
            return DEFAULT_S_TILDE * np.eye(m)
        S = np.asarray(self.S_tilde, dtype=float)
        if S.ndim == 0:
            return float(S) * np.eye(m)
        if S.ndim == 1:
            S = np.diag(S)
        if S.shape != (m, m):
            raise DimensionError(f"S_tilde has shape {S.shape}, split needs {(m, m)}")
        return S

    def data(self, split, position, t):
        if self.G is None or split.n_minus == 0:
            return np.zeros(split.n_minus)
        g = np.asarray(self.G(np.asarray(position, dtype=float), t, split), dtype=float)
        g = np.broadcast_to(g, (split.n_minus,)) if g.ndim == 0 else g
        if g.shape != (split.n_minus,):
            raise DimensionError(f"data G has shape {g.shape}, expected ({split.n_minus},)")
        return g


def rotate_boundary_state(U_b, normal, model, formulation_id=None):
    """Rotate ``U_b`` to characteristic-like variables for ``formulation_id``.

    ``None`` or ``"auto"`` selects the model's default formulation for the
    sign of the normal velocity.  Raises :class:`DegenerateRotation` where
    the chosen formulation divides by a vanishing normal speed.
    """
    normal = _unit(normal)
    U_b = np.asarray(U_b, dtype=float)
    model.check_admissible(U_b)
    if formulation_id in (None, "auto"):
        formulation_id = model.default_formulation(U_b, normal)
    return model.split(U_b, normal, formulation_id)


@dataclass
class MarginCheck:
    margin: float
    passed: bool


def _min_eig(M):
    if M.size == 0:
        return np.inf
    return float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))


def r_condition_matrix(split, R):
    R = np.asarray(R, dtype=float).reshape(split.n_minus, split.n_plus)
    return np.diag(split.lam_plus) - R.T @ np.diag(split.abs_lam_minus) @ R


def check_R_condition(split, R, strict=False):
    """Smallest eigenvalue of ``Lambda^+ - R^T |Lambda^-| R``.

    Non-strict admissibility allows a zero margin; strict admissibility needs
    ``margin > STRICT_TOL * max(Lambda^+)``.  An empty ``Lambda^+`` block is
    vacuously (strictly) admissible with margin ``inf``.
    """
    R = np.asarray(R, dtype=float)
    if R.size != split.n_minus * split.n_plus:
        raise DimensionError(f"R has shape {R.shape}, split needs {(split.n_minus, split.n_plus)}")
    margin = _min_eig(r_condition_matrix(split, R))
    if strict:
        scale = float(np.max(split.lam_plus)) if split.n_plus else 0.0
        ok = margin > STRICT_TOL * scale
    else:
        scale = float(np.max(np.abs(split.lam))) if split.lam.size else 0.0
        ok = margin >= -PSD_TOL * max(scale, 1.0)
    return MarginCheck(margin, bool(ok))


def s_block_matrix(split, R, S_tilde):
    R = np.asarray(R, dtype=float).reshape(split.n_minus, split.n_plus)
    S_tilde = np.asarray(S_tilde, dtype=float).reshape(split.n_minus, split.n_minus)
    sq = np.diag(np.sqrt(split.abs_lam_minus))
    off = -R.T @ sq @ S_tilde
    return np.block(
        [
            [r_condition_matrix(split, R), off],
            [off.T, np.eye(split.n_minus) - S_tilde.T @ S_tilde],
        ]
    )


def check_S_smallness(split, R, S_tilde, inhomogeneous=False, require_strict=True):
    """Smallest eigenvalue of the block matrix bounding the data terms.

    The weak or strong boundary term equals a quadratic form in ``(W^+, G)``
    with this matrix, minus ``G^T G`` (plus a nonnegative square for weak
    imposition), so a nonnegative margin bounds the term by ``-G^T G``.
    """
    R = np.asarray(R, dtype=float)
    S_tilde = np.asarray(S_tilde, dtype=float)
    if np.ndim(S_tilde) == 0:
        S_tilde = float(S_tilde) * np.eye(split.n_minus)
    if S_tilde.shape != (split.n_minus, split.n_minus):
        raise DimensionError(f"S_tilde has shape {S_tilde.shape}")
    if inhomogeneous and split.n_minus and abs(np.linalg.det(S_tilde)) < 1e-300:
        raise SingularSTilde("S_tilde must be nonsingular for inhomogeneous data")
    if require_strict and not check_R_condition(split, R, strict=True).passed:
        raise InadmissibleBoundaryCondition("S-smallness requires a strictly admissible R")
    margin = _min_eig(s_block_matrix(split, R, S_tilde))
    return MarginCheck(margin, bool(margin >= -PSD_TOL))


def _bc_residual(split, bc, position, t):
    """``W^- - R W^+ - S^{-1} G`` and the pieces used to build it."""
    R = bc.R_matrix(split)
    G = bc.data(split, position, t)
    r = split.W_minus - R @ split.W_plus
    if split.n_minus and np.any(G != 0.0):
        S_t = bc.S_tilde_matrix(split)
        if abs(np.linalg.det(S_t)) < 1e-300:
            raise SingularSTilde("S_tilde must be nonsingular for inhomogeneous data")
        r = r - (S_t @ G) / np.sqrt(split.abs_lam_minus)
    return r, R, G


def penalty_from_split(split, bc, position=(0.0, 0.0), t=0.0):
    """``2 (J^- T^{-1})^T |Lambda^-| (W^- - R W^+ - S^{-1} G)``."""
    n = len(split.lam)
    if split.n_minus == 0:
        return np.zeros(n)
    r, _, _ = _bc_residual(split, bc, position, t)
    JT = split.T_inv[split.minus]
    return 2.0 * JT.T @ (split.abs_lam_minus * r)


def penalty_vector(U_b, normal, model, bc, t=0.0, position=(0.0, 0.0), formulation_id=None):
    if bc.mode != "weak":
        raise ValueError("penalty_vector requires a weakly imposed boundary condition")
    if formulation_id is None:
        formulation_id = resolve_formulation(bc, model, U_b, normal)
    split = rotate_boundary_state(U_b, normal, model, formulation_id)
    return penalty_from_split(split, bc, position, t)


def resolve_formulation(bc, model, U_b, normal):
    """Formulation at one node from ``bc.formulation``.

    A pair ``(inflow, outflow)`` selects by the sign of the normal velocity.
    """
    f = bc.formulation
    if isinstance(f, (tuple, list)):
        return f[0] if model.normal_velocity(U_b, normal) < 0 else f[1]
    if f in (None, "auto"):
        return model.default_formulation(U_b, normal)
    return f


@dataclass
class BoundaryOperator:
    L: np.ndarray
    g: np.ndarray


def boundary_operator_data(split, bc, position=(0.0, 0.0), t=0.0):
    """Boundary operator in original variables, ``L U = g``.

    ``L = |Lambda^-|^{1/2} (J^- - R J^+) T^{-1}`` and ``g = S_tilde G``.
    """
    n = len(split.lam)
    if split.n_minus == 0:
        return BoundaryOperator(np.zeros((0, n)), np.zeros(0))
    R = bc.R_matrix(split)
    sq = np.sqrt(split.abs_lam_minus)
    L = sq[:, None] * ((split.J_minus - R @ split.J_plus) @ split.T_inv)
    g = bc.S_tilde_matrix(split) @ bc.data(split, position, t)
    return BoundaryOperator(L, g)


def boundary_flux_from_split(split, bc, position=(0.0, 0.0), t=0.0, mode=None):
    """Per-node boundary integrand in boundary normalization.

    Weak: ``W^T Lambda W + 2 (W^-)^T Sigma (W^- - R W^+ - S^{-1} G)``.
    Strong: ``W^T Lambda W`` with ``W^-`` replaced by ``R W^+ + S^{-1} G``.
    """
    mode = bc.mode if mode is None else mode
    if split.n_minus == 0:
        return split.quadratic_form()
    r, R, G = _bc_residual(split, bc, position, t)
    sig = split.abs_lam_minus
    if mode == "weak":
        return split.quadratic_form() + 2.0 * float(np.dot(split.W_minus, sig * r))
    w_minus = split.W_minus - r
    return float(np.dot(split.lam_plus, split.W_plus**2) - np.dot(sig, w_minus**2))


def boundary_energy_flux(U_b, normal, model, bc, t=0.0, mode=None, position=(0.0, 0.0),
                         formulation_id=None):
    if formulation_id is None:
        formulation_id = resolve_formulation(bc, model, U_b, normal)
    split = rotate_boundary_state(U_b, normal, model, formulation_id)
    return boundary_flux_from_split(split, bc, position, t, mode)


def background_data(model, state_fn, R=None, S_tilde=DEFAULT_S_TILDE):
    """Data ``G`` that makes ``state_fn(position, t)`` satisfy the condition.

    With the local ``|Lambda^-|`` this gives ``S^{-1} G = W_bg^- - R W_bg^+``,
    where ``W_bg`` is the background state rotated with the same normal and
    formulation as the current split.  The split must carry its normal in
    ``aux["normal"]``.
    """
    probe = BoundaryCondition(R=R, S_tilde=S_tilde)

    def G(position, t, split):
        U_bg = np.asarray(state_fn(position, t), dtype=float)
        bg = model.split(U_bg, split.aux["normal"], split.formulation_id)
        Rm = probe.R_matrix(split)
        target = bg.W[split.minus] - Rm @ bg.W[split.plus]
        S_t = probe.S_tilde_matrix(split)
        return np.linalg.solve(S_t, np.sqrt(split.abs_lam_minus) * target)

    return G


def background_condition(model, state_fn, R=None, S_tilde=DEFAULT_S_TILDE, formulation="auto",
                         kind="characteristic"):
    """Weak condition whose data is generated from a background state."""
    return BoundaryCondition(R=R, S_tilde=S_tilde, G=background_data(model, state_fn, R, S_tilde),
                             formulation=formulation, kind=kind)
