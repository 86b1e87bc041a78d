"""Reverse-mode differentiation on a write-once tape of numpy primitives.

The tape supports exactly the operations the training losses are built
from (matrix products, additions, transposes, the Kronecker square, the
skew unfolding, the trapping-shift contractions, Frobenius/l1
reductions, and RK4 composition).  Forward values are computed with the
same numpy expressions as the plain routines in ``quadtensor`` and
``odesim``, so they agree bit-for-bit; the backward pass walks the tape
once in reverse, accumulating exact adjoints per primitive.
"""

import math

import numpy as np

from . import quadtensor
from .exceptions import ConfigError, ShapeMismatch

__all__ = ["Tape", "Var", "rk4_through", "grad_check"]


class Var:
    """Handle to a tape node; holds the cached forward value."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape, node_id, value):
        self.tape = tape
        self.id = node_id
        self.value = value

    @property
    def shape(self):
        return np.shape(self.value)


def _val(x):
    return x.value if isinstance(x, Var) else x


class Tape:
    """Append-only record of operations for one forward evaluation.

    Nodes are stored in topological order by construction; ``gradients``
    visits each node exactly once in reverse.  Operands may be ``Var``
    handles or plain arrays/floats (constants, which receive no
    adjoint).
    """

    def __init__(self):
        self._parents = []  # tuple of parent node ids per node
        self._vjps = []     # callable(grad) -> tuple of parent grads

    def _record(self, value, parents=(), vjp=None):
        node_id = len(self._parents)
        self._parents.append(tuple(p.id for p in parents))
        self._vjps.append(vjp)
        return Var(self, node_id, value)

    def leaf(self, value):
        """Register a differentiable input."""
        return self._record(np.asarray(value, dtype=float))

    def _unary(self, a, value, back):
        if isinstance(a, Var):
            return self._record(value, (a,), lambda g: (back(g),))
        return self._record(value)

    # -- primitives ----------------------------------------------------

    def mat_mul(self, a, b):
        va, vb = _val(a), _val(b)
        if np.ndim(va) != 2 or np.ndim(vb) not in (1, 2) or va.shape[1] != vb.shape[0]:
            raise ShapeMismatch(
                f"matmul shapes not conformant: {np.shape(va)} @ {np.shape(vb)}"
            )
        value = va @ vb
        parents, backs = [], []
        if isinstance(a, Var):
            parents.append(a)
            if np.ndim(vb) == 1:
                backs.append(lambda g: np.outer(g, vb))
            else:
                backs.append(lambda g: g @ vb.T)
        if isinstance(b, Var):
            parents.append(b)
            backs.append(lambda g: va.T @ g)
        return self._record(value, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def mat_add(self, a, b):
        va, vb = _val(a), _val(b)
        if np.shape(va) != np.shape(vb):
            raise ShapeMismatch(f"add shapes differ: {np.shape(va)} vs {np.shape(vb)}")
        parents, backs = [], []
        if isinstance(a, Var):
            parents.append(a)
            backs.append(lambda g: g)
        if isinstance(b, Var):
            parents.append(b)
            backs.append(lambda g: g)
        return self._record(va + vb, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def mat_sub(self, a, b):
        va, vb = _val(a), _val(b)
        if np.shape(va) != np.shape(vb):
            raise ShapeMismatch(f"sub shapes differ: {np.shape(va)} vs {np.shape(vb)}")
        parents, backs = [], []
        if isinstance(a, Var):
            parents.append(a)
            backs.append(lambda g: g)
        if isinstance(b, Var):
            parents.append(b)
            backs.append(lambda g: -g)
        return self._record(va - vb, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def add_col(self, mat, vec):
        """Matrix plus a column vector broadcast across columns."""
        vm, vv = _val(mat), _val(vec)
        value = vm + vv[:, None]
        parents, backs = [], []
        if isinstance(mat, Var):
            parents.append(mat)
            backs.append(lambda g: g)
        if isinstance(vec, Var):
            parents.append(vec)
            backs.append(lambda g: g.sum(axis=1))
        return self._record(value, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def transpose(self, a):
        return self._unary(a, _val(a).T, lambda g: g.T)

    def scale(self, a, c):
        c = float(c)
        return self._unary(a, c * _val(a), lambda g: c * g)

    def mask(self, a, mask_array):
        m = np.asarray(mask_array, dtype=float)
        return self._unary(a, _val(a) * m, lambda g: g * m)

    def kron_squared(self, x):
        """Column-wise Kronecker square of an (n, N) snapshot matrix."""
        vx = _val(x)
        value = quadtensor.colwise_kron(vx)
        n = vx.shape[0]

        def back(g):
            G3 = g.reshape(n, n, -1)
            return (G3 * vx[None, :, :]).sum(axis=1) + (G3 * vx[:, None, :]).sum(axis=0)

        return self._unary(x, value, back)

    def skew_unfold(self, T):
        """mat₁(T) − mat₂(T); block b of the result is T[:,:,b] − T[:,:,b]ᵀ."""
        vT = _val(T)
        n = vT.shape[0]
        value = quadtensor.matricize(vT, 1) - quadtensor.matricize(vT, 2)

        def back(g):
            # D[r, n*b + j] = T[r, j, b] - T[j, r, b], so the adjoint of
            # Gb[r, b, j] = g[r, n*b + j] is dT[p, q, s] = Gb[p, s, q] - Gb[q, s, p].
            Gb = g.reshape(n, n, n)
            return Gb.transpose(0, 2, 1) - Gb.transpose(2, 0, 1)

        return self._unary(T, value, back)

    def block_rmul(self, D, M):
        """Right-multiply each n × n block of D by the constant matrix M."""
        vD = _val(D)
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        value = np.einsum("ibj,jl->ibl", vD.reshape(n, n, n), M).reshape(n, n * n)

        def back(g):
            return np.einsum("ibl,jl->ibj", g.reshape(n, n, n), M).reshape(n, n * n)

        return self._unary(D, value, back)

    def contract_right(self, H, m):
        """H (I ⊗ m) as an n × n matrix."""
        vH, vm = _val(H), _val(m)
        n = vH.shape[0]
        H4 = vH.reshape(n, n, n)
        value = np.einsum("iab,b->ia", H4, vm)
        parents, backs = [], []
        if isinstance(H, Var):
            parents.append(H)
            backs.append(lambda g: (g[:, :, None] * vm[None, None, :]).reshape(n, n * n))
        if isinstance(m, Var):
            parents.append(m)
            backs.append(lambda g: np.einsum("iab,ia->b", H4, g))
        return self._record(value, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def contract_left(self, H, m):
        """H (m ⊗ I) as an n × n matrix."""
        vH, vm = _val(H), _val(m)
        n = vH.shape[0]
        H4 = vH.reshape(n, n, n)
        value = np.einsum("iab,a->ib", H4, vm)
        parents, backs = [], []
        if isinstance(H, Var):
            parents.append(H)
            backs.append(lambda g: (g[:, None, :] * vm[None, :, None]).reshape(n, n * n))
        if isinstance(m, Var):
            parents.append(m)
            backs.append(lambda g: np.einsum("iab,ib->a", H4, g))
        return self._record(value, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def contract_both(self, H, m):
        """The vector H (m ⊗ m)."""
        vH, vm = _val(H), _val(m)
        n = vH.shape[0]
        H4 = vH.reshape(n, n, n)
        value = np.einsum("iab,a,b->i", H4, vm, vm)
        parents, backs = [], []
        if isinstance(H, Var):
            parents.append(H)
            backs.append(
                lambda g: (g[:, None, None] * vm[None, :, None] * vm[None, None, :]).reshape(n, n * n)
            )
        if isinstance(m, Var):
            parents.append(m)
            backs.append(
                lambda g: np.einsum("iab,i,b->a", H4, g, vm) + np.einsum("iab,i,a->b", H4, g, vm)
            )
        return self._record(value, tuple(parents), lambda g: tuple(f(g) for f in backs))

    def frobenius_sq(self, a):
        va = _val(a)
        return self._unary(a, float(np.sum(va * va)), lambda g: (2.0 * g) * va)

    def l1_mean(self, a):
        va = _val(a)
        return self._unary(a, float(np.abs(va).mean()), lambda g: (g / va.size) * np.sign(va))

    # -- backward ------------------------------------------------------

    def gradients(self, loss, wrt):
        """Adjoints of a scalar node with respect to a list of leaves.

        Returns one array per requested leaf (zeros where the loss does
        not depend on it).  Each node is visited exactly once, in
        reverse construction order, so repeated calls are bit-identical.
        """
        if np.ndim(_val(loss)) != 0:
            raise ShapeMismatch("gradients require a scalar loss node")
        grads = [None] * len(self._parents)
        grads[loss.id] = 1.0
        for node_id in range(loss.id, -1, -1):
            g = grads[node_id]
            if g is None or self._vjps[node_id] is None:
                continue
            for pid, pg in zip(self._parents[node_id], self._vjps[node_id](g)):
                grads[pid] = pg if grads[pid] is None else grads[pid] + pg
        out = []
        for v in wrt:
            g = grads[v.id]
            out.append(np.zeros_like(v.value) if g is None else np.asarray(g, dtype=float))
        return out


def rk4_through(tape, A, H, B, X0, dt):
    """One recorded RK4 step of dx/dt = A x + H (x ⊗ x) + B from X0.

    ``X0`` is an (n, N) matrix of start snapshots — a constant or a
    ``Var`` (so steps can be chained).  A, H, B may be tape variables.
    The arithmetic mirrors one ``odesim.rk4_step`` of the batched
    ``QuadModel`` right-hand side exactly.
    """

    def rhs(X):
        s = tape.mat_add(tape.mat_mul(A, X), tape.mat_mul(H, tape.kron_squared(X)))
        return tape.add_col(s, B)

    k1 = rhs(X0)
    k2 = rhs(tape.mat_add(X0, tape.scale(k1, dt / 2.0)))
    k3 = rhs(tape.mat_add(X0, tape.scale(k2, dt / 2.0)))
    k4 = rhs(tape.mat_add(X0, tape.scale(k3, dt)))
    inner = tape.mat_add(tape.mat_add(tape.mat_add(k1, tape.scale(k2, 2.0)), tape.scale(k3, 2.0)), k4)
    return tape.mat_add(X0, tape.scale(inner, dt / 6.0))


def grad_check(loss, params, eps=1e-5, directions=20, seed=0):
    """Max relative error of tape gradients vs central finite differences.

    Parameters
    ----------
    loss : callable(tape, leaves) -> Var
        Builds the scalar loss from a dict of leaf variables.
    params : dict[str, ndarray]
        Point at which to check.
    eps : float
        Central-difference step, in [1e−8, 1e−3].
    directions : int
        Number of random unit directions in the stacked parameter space.

    Returns
    -------
    float
    """
    if not 1e-8 <= eps <= 1e-3:
        raise ConfigError(f"eps must be in [1e-8, 1e-3], got {eps}")
    names = sorted(params)
    params = {k: np.asarray(params[k], dtype=float) for k in names}

    def evaluate(values):
        tape = Tape()
        leaves = {k: tape.leaf(values[k]) for k in names}
        return tape, leaves, loss(tape, leaves)

    tape, leaves, out = evaluate(params)
    grads = dict(zip(names, tape.gradients(out, [leaves[k] for k in names])))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(directions):
        d = {k: rng.standard_normal(params[k].shape) for k in names}
        nrm = math.sqrt(sum(float((v ** 2).sum()) for v in d.values()))
        d = {k: v / nrm for k, v in d.items()}
        analytic = sum(float((grads[k] * d[k]).sum()) for k in names)
        plus = evaluate({k: params[k] + eps * d[k] for k in names})[2]
        minus = evaluate({k: params[k] - eps * d[k] for k in names})[2]
        numeric = (float(_val(plus)) - float(_val(minus))) / (2.0 * eps)
        denom = max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
