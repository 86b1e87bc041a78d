"""POD bases, (block-diagonal) projection, and trajectory error metrics."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, RankTooLarge, ShapeMismatch, ZeroTruth

__all__ = ["PodBasis", "pod_basis", "blockdiag_basis", "project", "unproject", "relative_l2"]


@dataclass
class PodBasis:
    """An orthonormal reduced basis with its singular-value provenance.

    ``V`` is N × r with orthonormal columns; ``singular_values`` is the
    full (descending) spectrum of the snapshot matrix the basis was cut
    from; ``energy_captured`` is the retained fraction Σᵢ≤r σᵢ² / Σ σᵢ².
    """

    V: np.ndarray
    singular_values: np.ndarray
    energy_captured: float

    @property
    def rank(self):
        return self.V.shape[1]


def pod_basis(Y, target):
    """Leading left singular vectors of a snapshot matrix.

    Parameters
    ----------
    Y : (N, M) ndarray
        Snapshots as columns.
    target : int or float
        Either the rank (int) or an energy fraction in (0, 1]; with a
        fraction the smallest rank achieving it is selected.

    Returns
    -------
    PodBasis
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeMismatch(f"expected an N x M snapshot matrix, got {Y.shape}")
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    total = float((s ** 2).sum())
    if total == 0.0:
        raise RankTooLarge("snapshot matrix has zero energy")
    cum = np.cumsum(s ** 2) / total

    if isinstance(target, (bool, np.bool_)):
        raise ConfigError("target must be an integer rank or a fraction")
    if isinstance(target, (int, np.integer)):
        rank = int(target)
        if not 1 <= rank <= s.size:
            raise RankTooLarge(f"rank {rank} not in [1, {s.size}]")
    elif isinstance(target, float):
        if not 0.0 < target <= 1.0:
            raise ConfigError(f"energy fraction must be in (0, 1], got {target}")
        rank = int(np.searchsorted(cum, target - 1e-12) + 1)
        rank = min(rank, s.size)
    else:
        raise ConfigError(f"target must be int or float, got {type(target).__name__}")

    return PodBasis(U[:, :rank].copy(), s.copy(), float(cum[rank - 1]))


def blockdiag_basis(bases):
    """Stack bases block-diagonally (one block per state channel).

    Keeps the channels uncoupled in the reduced coordinates, which is
    what lifted variables need.  The combined spectrum is the
    concatenation of the member spectra and the captured energy is the
    energy-weighted combination.
    """
    bases = list(bases)
    if not bases:
        raise ConfigError("need at least one basis")
    if len(bases) == 1:
        return bases[0]
    V = scipy.linalg.block_diag(*[b.V for b in bases])
    spectra = np.concatenate([b.singular_values for b in bases])
    totals = np.array([float((b.singular_values ** 2).sum()) for b in bases])
    kept = np.array([b.energy_captured for b in bases]) * totals
    return PodBasis(V, np.sort(spectra)[::-1], float(kept.sum() / totals.sum()))


def project(Y, basis):
    """Reduced coordinates X = Vᵀ Y (columns are states; 1-D allowed)."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != basis.V.shape[0]:
        raise ShapeMismatch(
            f"state dimension {Y.shape[0]} does not match basis rows {basis.V.shape[0]}"
        )
    return basis.V.T @ Y


def unproject(X, basis):
    """Reconstruction Ŷ = V X."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != basis.V.shape[1]:
        raise ShapeMismatch(
            f"reduced dimension {X.shape[0]} does not match basis rank {basis.V.shape[1]}"
        )
    return basis.V @ X


def relative_l2(X_truth, X_learned, norm="fro"):
    """Relative error ‖X_truth − X_learned‖ / ‖X_truth‖ of stacked snapshots.

    ``norm`` is ``"fro"`` (default) or ``"spectral"``.
    """
    X_truth = np.asarray(X_truth, dtype=float)
    X_learned = np.asarray(X_learned, dtype=float)
    if X_truth.shape != X_learned.shape:
        raise ShapeMismatch(f"shapes differ: {X_truth.shape} vs {X_learned.shape}")
    if norm == "fro":
        ord_ = "fro" if X_truth.ndim == 2 else 2
    elif norm == "spectral":
        ord_ = 2
    else:
        raise ConfigError(f"norm must be 'fro' or 'spectral', got {norm!r}")
    denom = np.linalg.norm(X_truth, ord_)
    if denom == 0.0:
        raise ZeroTruth("reference snapshots have zero norm")
    return float(np.linalg.norm(X_truth - X_learned, ord_) / denom)
