"""Kronecker algebra for quadratic models dx/dt = A x + H (x ⊗ x) + B.

Conventions
-----------
States are column vectors x ∈ R^n.  The Kronecker square is ordered
row-major, ``(x ⊗ x)[n*i + j] = x[i] * x[j]`` (the ``numpy.kron`` order),
so column ``n*i + j`` of the Hessian matrix H ∈ R^{n×n²} multiplies the
monomial x_i x_j.  Writing H = [H_1, ..., H_n] in n×n blocks, the
quadratic term acts as

    H (x ⊗ x) = Σ_i x_i · H_i x,

i.e. block i is selected by the *first* Kronecker factor.

The entry view H_ijk := e_iᵀ H (e_j ⊗ e_k) = H[i, n*j + k] defines the
coefficient tensor used by the energy-preservation test: x ⊗ x spans all
symmetric monomials, and xᵀ H (x ⊗ x) vanishes identically if and only if

    H_ijk + H_ikj + H_jik + H_jki + H_kij + H_kji = 0   for all (i, j, k).
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .exceptions import NonSPD, NotEnergyPreserving, ShapeMismatch, SolveFailed

__all__ = [
    "QuadModel",
    "kron_squared",
    "colwise_kron",
    "energy_preserving_residual",
    "gen_energy_preserving_residual",
    "matricize",
    "symmetrize_H",
    "to_skew_form",
    "to_skew_form_general",
    "kron_contract_right",
    "kron_contract_left",
    "kron_contract_both",
    "translate",
]


def _check_H(H):
    """Validate that H is a dense n × n² matrix and return (H, n)."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != H.shape[0] ** 2:
        raise ShapeMismatch(f"H must be n x n^2, got {H.shape}")
    return H, H.shape[0]


def _require_spd(Q, name="Q", tol=1e-10):
    """Validate symmetric positive definiteness of Q and return it as float."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise NonSPD(f"{name} must be square, got {Q.shape}")
    scale = max(1.0, np.abs(Q).max())
    if np.abs(Q - Q.T).max() > tol * scale:
        raise NonSPD(f"{name} is not symmetric")
    if np.linalg.eigvalsh(Q).min() <= 0:
        raise NonSPD(f"{name} is not positive definite")
    return Q


def kron_squared(x):
    """Kronecker square of a vector: ``kron_squared(x)[n*i+j] = x[i]*x[j]``.

    Parameters
    ----------
    x : (n,) ndarray

    Returns
    -------
    (n**2,) ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected a vector, got shape {x.shape}")
    return np.kron(x, x)


def colwise_kron(X):
    """Column-wise Kronecker square of a snapshot matrix.

    Column c of the result is ``kron_squared(X[:, c])``.

    Parameters
    ----------
    X : (n, N) ndarray

    Returns
    -------
    (n**2, N) ndarray
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {X.shape}")
    n, N = X.shape
    return (X[:, None, :] * X[None, :, :]).reshape(n * n, N)


def _index_residual(H, n):
    """Max absolute 6-permutation sum of the coefficient tensor of H."""
    T = H.reshape(n, n, n)
    total = np.zeros_like(T)
    for p in permutations((0, 1, 2)):
        total += T.transpose(p)
    return float(np.abs(total).max())


def _unit_samples(n, num_samples, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, num_samples))
    X /= np.linalg.norm(X, axis=0)
    return X


def energy_preserving_residual(H, num_samples=100, seed=0):
    """Residual of the identity xᵀ H (x ⊗ x) = 0.

    Combines two equivalent checks and returns the larger: the exact
    index condition (6-permutation sums of the coefficient tensor) and
    the sampled maximum of |xᵀ H (x ⊗ x)| over random unit vectors.
    The result is 0 (up to roundoff) exactly when H is energy-preserving.

    Parameters
    ----------
    H : (n, n**2) ndarray
    num_samples : int
        Number of random unit vectors for the sampled check.
    seed : int
        Seed for the sampling rng; fixed seed makes the result
        deterministic.

    Returns
    -------
    float
    """
    H, n = _check_H(H)
    X = _unit_samples(n, num_samples, seed)
    vals = np.einsum("ic,ic->c", X, H @ colwise_kron(X))
    return max(_index_residual(H, n), float(np.abs(vals).max()))


def gen_energy_preserving_residual(H, Q, num_samples=100, seed=0):
    """Residual of the weighted identity xᵀ Q H (x ⊗ x) = 0.

    Equals ``energy_preserving_residual(H)`` when ``Q`` is the identity,
    since xᵀQH(x⊗x) ≡ 0 is the plain condition applied to the product
    Q H.

    Parameters
    ----------
    H : (n, n**2) ndarray
    Q : (n, n) ndarray
        Symmetric positive definite weight; raises :class:`NonSPD`
        otherwise.

    Returns
    -------
    float
    """
    H, n = _check_H(H)
    Q = _require_spd(Q)
    if Q.shape[0] != n:
        raise ShapeMismatch(f"Q must be {n} x {n}, got {Q.shape}")
    X = _unit_samples(n, num_samples, seed)
    vals = np.einsum("ic,ic->c", X, Q @ (H @ colwise_kron(X)))
    return max(_index_residual(Q @ H, n), float(np.abs(vals).max()))


def matricize(T, mode):
    """Unfold a third-order tensor along mode 1 or mode 2.

    Mode 1 places ``T[i, j, k]`` at row i, column ``j + n*k``; mode 2
    places it at row j, column ``i + n*k``.  For any tensor, block k of
    ``matricize(T, 1) - matricize(T, 2)`` equals ``S_k - S_kᵀ`` with
    ``S_k = T[:, :, k]``, which is the skew-unfolding used by the
    globally-stable Hessian parameterization.

    Parameters
    ----------
    T : (n, n, n) ndarray
    mode : int
        1 or 2.

    Returns
    -------
    (n, n**2) ndarray
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or len(set(T.shape)) != 1:
        raise ShapeMismatch(f"expected an n x n x n tensor, got {T.shape}")
    n = T.shape[0]
    if mode == 1:
        return T.transpose(0, 2, 1).reshape(n, n * n)
    if mode == 2:
        return T.transpose(1, 2, 0).reshape(n, n * n)
    raise ShapeMismatch(f"mode must be 1 or 2, got {mode!r}")


def symmetrize_H(H):
    """Symmetrize H so paired columns n*i+j and n*j+i carry equal weight.

    The returned matrix has the same action on every Kronecker square
    and is the canonical representative used when comparing learned
    coefficients entry-wise.
    """
    H, n = _check_H(H)
    T = H.reshape(n, n, n)
    return (0.5 * (T + T.transpose(0, 2, 1))).reshape(n, n * n)


def _vec_index(n, r, i, j):
    """Flat index of H[r, n*i + j] in the row-major vectorization."""
    return r * n * n + n * i + j


def to_skew_form(H, tol=1e-8, solve_tol=1e-6):
    """Rewrite an energy-preserving H with skew-symmetric n × n blocks.

    Every energy-preserving Hessian admits an equivalent representation
    H̃ = [H̃_1, ..., H̃_n] with each H̃_i skew-symmetric and
    H̃ (x ⊗ x) = H (x ⊗ x) for all x.  The representation is found by
    stacking the action-equality equations (one per row and unordered
    index pair) with the skewness constraints and solving the resulting
    consistent linear system for the entries of H̃ by minimum-norm least
    squares.

    Parameters
    ----------
    H : (n, n**2) ndarray
    tol : float
        Maximum admissible ``energy_preserving_residual(H)``; raises
        :class:`NotEnergyPreserving` above it.
    solve_tol : float
        Maximum admissible relative residual of the linear solve; raises
        :class:`SolveFailed` above it.

    Returns
    -------
    (n, n**2) ndarray
        H̃ with skew-symmetric blocks and the same action as H.
    """
    H, n = _check_H(H)
    res = energy_preserving_residual(H)
    if res > tol:
        raise NotEnergyPreserving(f"residual {res:.3e} exceeds tol {tol:.1e}")

    rows, rhs = [], []
    # Action equality: the coefficient of x_i x_j in row r must match.
    for r in range(n):
        for i in range(n):
            for j in range(i, n):
                row = np.zeros(n ** 3)
                if i == j:
                    row[_vec_index(n, r, i, i)] = 1.0
                    rhs.append(H[r, n * i + i])
                else:
                    row[_vec_index(n, r, i, j)] = 1.0
                    row[_vec_index(n, r, j, i)] = 1.0
                    rhs.append(H[r, n * i + j] + H[r, n * j + i])
                rows.append(row)
    # Skewness of every block: H̃[r, n*b + j] + H̃[j, n*b + r] = 0.
    for b in range(n):
        for r in range(n):
            for j in range(r, n):
                row = np.zeros(n ** 3)
                row[_vec_index(n, r, b, j)] += 1.0
                row[_vec_index(n, j, b, r)] += 1.0
                rows.append(row)
                rhs.append(0.0)

    M = np.array(rows)
    rhs = np.array(rhs)
    sol, _, _, _ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = np.linalg.norm(M @ sol - rhs)
    if resid > solve_tol * max(1.0, np.linalg.norm(rhs)):
        raise SolveFailed(f"solve residual {resid:.3e} exceeds {solve_tol:.1e}")
    return sol.reshape(n, n * n)


def to_skew_form_general(H, Q, tol=1e-8, solve_tol=1e-6):
    """Rewrite H as [G_1 Q, ..., G_n Q] with each G_i skew-symmetric.

    Requires xᵀ Q H (x ⊗ x) = 0 for all x with Q symmetric positive
    definite.  Factoring Q = Lᵀ L (Cholesky) reduces the problem to the
    unweighted case: Ĥ = L H (L⁻¹ ⊗ L⁻¹) is plainly energy-preserving,
    its skew form is pulled back through L, and the skew factors are
    recombined as G_i = Σ_j L[j, i] · L⁻¹ Ĵ_j L⁻ᵀ.

    Returns
    -------
    (n, n**2) ndarray
        H̃ with H̃ (x ⊗ x) = H (x ⊗ x) for all x and skew blocks after
        factoring Q out of each block on the right.
    """
    H, n = _check_H(H)
    Q = _require_spd(Q)
    res = gen_energy_preserving_residual(H, Q)
    if res > tol:
        raise NotEnergyPreserving(f"residual {res:.3e} exceeds tol {tol:.1e}")

    L = np.linalg.cholesky(Q).T  # upper triangular, Q = Lᵀ L
    Linv = np.linalg.solve(L, np.eye(n))
    T = H.reshape(n, n, n)
    H_hat = L @ np.einsum("rij,ik,jl->rkl", T, Linv, Linv).reshape(n, n * n)
    J = to_skew_form(H_hat, tol=tol, solve_tol=solve_tol)

    G = np.zeros((n, n, n))  # G[i] is the skew factor of block i
    for j in range(n):
        J_j = Linv @ J[:, n * j : n * j + n] @ Linv.T
        G += L[j, :, None, None] * J_j[None, :, :]
    out = np.hstack([G[i] @ Q for i in range(n)])

    X = _unit_samples(n, 64, seed=1)
    err = np.abs((H - out) @ colwise_kron(X)).max()
    if err > solve_tol * max(1.0, np.abs(H).max()):
        raise SolveFailed(f"reassembled action differs by {err:.3e}")
    return out


def kron_contract_right(H, m):
    """The n × n matrix H (I ⊗ m), i.e. x ↦ H (x ⊗ m)."""
    H, n = _check_H(H)
    return np.einsum("iab,b->ia", H.reshape(n, n, n), np.asarray(m, dtype=float))


def kron_contract_left(H, m):
    """The n × n matrix H (m ⊗ I), i.e. x ↦ H (m ⊗ x)."""
    H, n = _check_H(H)
    return np.einsum("iab,a->ib", H.reshape(n, n, n), np.asarray(m, dtype=float))


def kron_contract_both(H, m):
    """The vector H (m ⊗ m)."""
    H, n = _check_H(H)
    m = np.asarray(m, dtype=float)
    return np.einsum("iab,a,b->i", H.reshape(n, n, n), m, m)


def translate(model, m):
    """Rewrite a model in the shifted coordinate x̃ = x − m.

    The Hessian is translation-invariant; the linear and constant terms
    absorb the cross and pure terms in m:

        Ã = A + H (I ⊗ m) + H (m ⊗ I),    B̃ = B + A m + H (m ⊗ m).

    Returns a new :class:`QuadModel` in the shifted coordinates.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (model.n,):
        raise ShapeMismatch(f"m must have shape ({model.n},), got {m.shape}")
    A_t = model.A + kron_contract_right(model.H, m) + kron_contract_left(model.H, m)
    B_t = model.B + model.A @ m + kron_contract_both(model.H, m)
    return QuadModel(A_t, model.H.copy(), B_t)


@dataclass
class QuadModel:
    """A quadratic model dx/dt = A x + H (x ⊗ x) + B.

    Parameters
    ----------
    A : (n, n) ndarray
    H : (n, n**2) ndarray
    B : (n,) ndarray, optional
        Constant forcing; defaults to zero.
    """

    A: np.ndarray
    H: np.ndarray
    B: np.ndarray = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ShapeMismatch(f"A must be square, got {self.A.shape}")
        n = self.A.shape[0]
        self.H, nH = _check_H(self.H)
        if nH != n:
            raise ShapeMismatch(f"H rows {nH} do not match A size {n}")
        self.B = np.zeros(n) if self.B is None else np.asarray(self.B, dtype=float)
        if self.B.shape != (n,):
            raise ShapeMismatch(f"B must have shape ({n},), got {self.B.shape}")

    @property
    def n(self):
        """State dimension."""
        return self.A.shape[0]

    def rhs(self, x):
        """Evaluate the right-hand side at a state vector or snapshot matrix.

        For a matrix argument each column is a state and B broadcasts
        across columns.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.A @ x + self.H @ kron_squared(x) + self.B
        if x.ndim == 2:
            return self.A @ x + self.H @ colwise_kron(x) + self.B[:, None]
        raise ShapeMismatch(f"state must be 1-D or 2-D, got shape {x.shape}")
