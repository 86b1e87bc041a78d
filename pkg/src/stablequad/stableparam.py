"""Unconstrained parameterizations of provably stable quadratic models.

Three nested families, each mapping free parameter blocks to a
:class:`~stablequad.quadtensor.QuadModel` whose stability certificate
holds by construction for (almost) every parameter value:

``las``
    Locally asymptotically stable linear part.  A = (J − R) Q with
    J = J_raw − J_rawᵀ skew, R = R_fac R_facᵀ and Q = Q_fac Q_facᵀ
    positive (semi-)definite; the Hessian is free.  V(x) = ½ xᵀ Q x
    decreases on a computable neighborhood of the origin.

``gas``
    Globally asymptotically stable.  Same linear part; the Hessian is
    built from a free third-order tensor as
    H = (mat₁(T) − mat₂(T)) (I ⊗ Q), which always satisfies
    xᵀ Q H (x ⊗ x) = 0, so V decays everywhere.

``atr``
    Attracting trapping region.  A gas-form model posed in shifted
    coordinates x̃ = x − m with a constant term B̃; every trajectory
    eventually enters the ball of radius ‖B̃‖ / σ_min((QÃ)_s) around m.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import quadtensor
from .exceptions import ConfigError, NotStrictlyStable, ShapeMismatch
from .quadtensor import QuadModel

__all__ = [
    "LasParams",
    "GasParams",
    "AtrParams",
    "StabilityCertificate",
    "assemble_las",
    "assemble_gas",
    "assemble_atr",
    "local_radius",
    "trapping_radius",
    "certify",
]


@dataclass
class LasParams:
    """Free parameters of the locally-stable family.

    All blocks are unconstrained real matrices; ``H_free`` is the full
    n × n² Hessian.
    """

    J_raw: np.ndarray
    R_fac: np.ndarray
    Q_fac: np.ndarray
    H_free: np.ndarray

    @property
    def n(self):
        return np.asarray(self.J_raw).shape[0]


@dataclass
class GasParams:
    """Free parameters of the globally-stable family.

    ``H_ten`` is an unconstrained n × n × n tensor; its skew unfolding
    generates the energy-preserving Hessian.
    """

    J_raw: np.ndarray
    R_fac: np.ndarray
    Q_fac: np.ndarray
    H_ten: np.ndarray

    @property
    def n(self):
        return np.asarray(self.J_raw).shape[0]


@dataclass
class AtrParams:
    """Free parameters of the trapping-region family.

    Extends the gas family with the region center ``m`` and the constant
    term ``B_tilde`` of the shifted coordinates.
    """

    J_raw: np.ndarray
    R_fac: np.ndarray
    Q_fac: np.ndarray
    H_ten: np.ndarray
    m: np.ndarray
    B_tilde: np.ndarray

    @property
    def n(self):
        return np.asarray(self.J_raw).shape[0]


def _stable_linear(J_raw, R_fac, Q_fac):
    """A = (J_raw − J_rawᵀ − R_fac R_facᵀ) (Q_fac Q_facᵀ) and the Gram Q."""
    J_raw = np.asarray(J_raw, dtype=float)
    R_fac = np.asarray(R_fac, dtype=float)
    Q_fac = np.asarray(Q_fac, dtype=float)
    M = Q_fac @ Q_fac.T
    A = (J_raw - J_raw.T - R_fac @ R_fac.T) @ M
    return A, M


def _gas_hessian(H_ten, M):
    """Energy-preserving Hessian (mat₁(T) − mat₂(T)) (I ⊗ M)."""
    T = np.asarray(H_ten, dtype=float)
    D = quadtensor.matricize(T, 1) - quadtensor.matricize(T, 2)
    n = T.shape[0]
    D3 = D.reshape(n, n, n)  # D3[i, b, j]: block b has skew slice D3[:, b, :]
    return np.einsum("ibj,jl->ibl", D3, M).reshape(n, n * n)


def assemble_las(p):
    """Assemble the locally-stable model for :class:`LasParams`."""
    A, _ = _stable_linear(p.J_raw, p.R_fac, p.Q_fac)
    return QuadModel(A, np.asarray(p.H_free, dtype=float).copy())


def assemble_gas(p):
    """Assemble the globally-stable model for :class:`GasParams`."""
    A, M = _stable_linear(p.J_raw, p.R_fac, p.Q_fac)
    return QuadModel(A, _gas_hessian(p.H_ten, M))


def assemble_atr(p):
    """Assemble the trapping-region model for :class:`AtrParams`.

    The parameters live in the shifted coordinates x̃ = x − m; the
    returned model is expressed in the original coordinates, so that
    simulating it from x0 matches simulating the shifted model from
    x0 − m (up to the shift).
    """
    A_t, M = _stable_linear(p.J_raw, p.R_fac, p.Q_fac)
    H = _gas_hessian(p.H_ten, M)
    m = np.asarray(p.m, dtype=float)
    B_t = np.asarray(p.B_tilde, dtype=float)
    A = A_t - quadtensor.kron_contract_right(H, m) - quadtensor.kron_contract_left(H, m)
    B = B_t + quadtensor.kron_contract_both(H, m) - A_t @ m
    return QuadModel(A, H, B)


def local_radius(J, R, Q, H):
    """Guaranteed decay radius of V(x) = ½ xᵀ Q x for A = (J − R) Q.

    With L Lᵀ = Qᵀ R Q, the Lyapunov function decreases strictly for
    0 < ‖x‖₂ < r where

        r = σ_min(L)² / (‖Q‖₂ ‖H‖₂) = λ_min(Qᵀ R Q) / (‖Q‖₂ ‖H‖₂).

    Parameters
    ----------
    J, R, Q : (n, n) ndarray
        Assembled matrices: J skew-symmetric, R and Q symmetric positive
        definite.
    H : (n, n**2) ndarray

    Returns
    -------
    float
        ``math.inf`` when H is identically zero (linear system, global
        decay).
    """
    J = np.asarray(J, dtype=float)
    if np.abs(J + J.T).max() > 1e-10 * max(1.0, np.abs(J).max()):
        raise ConfigError("J is not skew-symmetric")
    R = quadtensor._require_spd(R, "R")
    Q = quadtensor._require_spd(Q, "Q")
    H, _ = quadtensor._check_H(H)
    h_norm = np.linalg.norm(H, 2)
    if h_norm == 0.0:
        return math.inf
    QRQ = Q.T @ R @ Q
    sigma_min_sq = np.linalg.eigvalsh(0.5 * (QRQ + QRQ.T)).min()
    return float(sigma_min_sq / (np.linalg.norm(Q, 2) * h_norm))


def trapping_radius(p):
    """Radius of the attracting trapping ball of an :class:`AtrParams`.

    Every trajectory of the assembled model ends up inside the ball of
    radius r = ‖B̃‖₂ / σ_min((Q Ã)_s) centered at m, where Ã is the
    shifted linear part and Q = Q_fac Q_facᵀ.

    Raises
    ------
    NotStrictlyStable
        If (Q Ã)_s is not strictly negative definite (singular R factor).
    """
    A_t, M = _stable_linear(p.J_raw, p.R_fac, p.Q_fac)
    S = 0.5 * (M @ A_t + A_t.T @ M)
    eigs = np.linalg.eigvalsh(S)
    if eigs.max() >= -1e-12:
        raise NotStrictlyStable(
            f"(QA)_s has eigenvalue {eigs.max():.3e}; trapping radius undefined"
        )
    sigma_min = -eigs.max()
    return float(np.linalg.norm(np.asarray(p.B_tilde, dtype=float)) / sigma_min)


@dataclass
class StabilityCertificate:
    """Outcome of :func:`certify`.

    Attributes
    ----------
    kind : str
        One of ``local``, ``global``, ``trapping``, ``energy_conserving``.
    valid : bool
        Whether every test for the claimed kind passed.
    eig_evidence : ndarray
        Eigenvalues the verdict is based on: of A for ``local``, of
        ((Q A)_s for the other kinds, with A shifted by m where
        applicable).
    lyapunov_Q : ndarray or None
        The weight matrix the certificate was checked against.
    m : ndarray or None
        Shift used for ``trapping`` / ``energy_conserving``.
    radius : float or None
        Kind-dependent: Lyapunov decay radius for ``local`` (may be
        ``math.inf`` when H = 0), ``math.inf`` for a valid ``global``
        certificate, trapping-ball radius for ``trapping``, ``None``
        otherwise.
    residuals : dict
        Named scalar diagnostics (energy residual, constant-term norm,
        spectral abscissa, ...).
    """

    kind: str
    valid: bool
    eig_evidence: np.ndarray
    lyapunov_Q: np.ndarray = None
    m: np.ndarray = None
    radius: float = None
    residuals: dict = field(default_factory=dict)


_STRICT_TOL = 1e-10
_RESIDUAL_TOL = 1e-8


def certify(model, kind, Q=None, m=None, num_samples=100, seed=0):
    """Check a claimed stability kind against an assembled model.

    The verdict is computed from the model operators alone, so it holds
    regardless of how the model was produced (in particular after
    coefficient pruning, which can break by-construction guarantees).

    Parameters
    ----------
    model : QuadModel
    kind : str
        ``local``: spectrum of A strictly in the open left half-plane.
        ``global``: (Q A)_s strictly negative definite, H
        energy-preserving w.r.t. Q, and B = 0.
        ``trapping``: same tests on the model shifted by m, with B̃
        free; attaches the trapping radius.
        ``energy_conserving``: (Q Ã)_s vanishes, H energy-preserving
        w.r.t. Q, and B̃ = 0 — the shifted energy is exactly conserved.
    Q : (n, n) ndarray, optional
        Lyapunov weight, identity by default.  Must be SPD.
    m : (n,) ndarray, optional
        Shift for the trapping / energy-conserving kinds, zero by
        default.

    Returns
    -------
    StabilityCertificate
    """
    n = model.n
    Q_mat = np.eye(n) if Q is None else quadtensor._require_spd(Q)
    if Q_mat.shape[0] != n:
        raise ShapeMismatch(f"Q must be {n} x {n}, got {Q_mat.shape}")

    if kind == "local":
        eigs = np.linalg.eigvals(model.A)
        scale = max(1.0, np.linalg.norm(model.A, 2))
        abscissa = float(eigs.real.max()) if n else -math.inf
        valid = bool(abscissa < -_STRICT_TOL * scale)
        radius = None
        # The decay radius needs the (J, R, Q) split; recover R from Q.
        R = -0.5 * (model.A @ np.linalg.inv(Q_mat) + np.linalg.inv(Q_mat) @ model.A.T)
        if valid and np.linalg.eigvalsh(0.5 * (R + R.T)).min() > 0:
            J = model.A @ np.linalg.inv(Q_mat) + R
            J = 0.5 * (J - J.T)
            radius = local_radius(J, 0.5 * (R + R.T), Q_mat, model.H)
        return StabilityCertificate(
            kind, valid, eigs, Q_mat, None, radius,
            {"spectral_abscissa": abscissa},
        )

    m_vec = np.zeros(n) if m is None else np.asarray(m, dtype=float)
    shifted = quadtensor.translate(model, m_vec) if np.any(m_vec) else model
    S = 0.5 * (Q_mat @ shifted.A + shifted.A.T @ Q_mat)
    eigs = np.linalg.eigvalsh(S)
    scale = max(1.0, np.linalg.norm(S, 2))
    energy_res = quadtensor.gen_energy_preserving_residual(
        model.H, Q_mat, num_samples=num_samples, seed=seed
    )
    b_norm = float(np.linalg.norm(shifted.B))
    residuals = {
        "energy_residual": energy_res,
        "shifted_b_norm": b_norm,
        "qa_sym_max_eig": float(eigs.max()),
    }

    if kind == "global":
        valid = bool(
            eigs.max() < -_STRICT_TOL * scale
            and energy_res < _RESIDUAL_TOL
            and b_norm <= _RESIDUAL_TOL * max(1.0, np.linalg.norm(model.A, 2))
        )
        radius = math.inf if valid else None
        return StabilityCertificate(kind, valid, eigs, Q_mat, None, radius, residuals)

    if kind == "trapping":
        strictly_stable = bool(eigs.max() < -_STRICT_TOL * scale)
        valid = strictly_stable and energy_res < _RESIDUAL_TOL
        radius = float(b_norm / -eigs.max()) if strictly_stable else None
        if radius is not None:
            residuals["trapping_radius"] = radius
        return StabilityCertificate(kind, valid, eigs, Q_mat, m_vec, radius, residuals)

    if kind == "energy_conserving":
        valid = bool(
            np.abs(eigs).max() <= _RESIDUAL_TOL * scale
            and energy_res < _RESIDUAL_TOL
            and b_norm <= _RESIDUAL_TOL * scale
        )
        return StabilityCertificate(kind, valid, eigs, Q_mat, m_vec, None, residuals)

    raise ConfigError(f"unknown certificate kind {kind!r}")
