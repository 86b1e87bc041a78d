"""Fixed-step integration and the benchmark problem generators.

All trajectories are integrated with the classical fourth-order
Runge-Kutta scheme.  Benchmark generators integrate the ground-truth
system with the same :func:`simulate` routine the evaluation path uses
(at an internal substep fine enough for the stiffest term), so a truth
model replayed on its own noiseless data reproduces it exactly.

Benchmarks
----------
``lorenz``
    The chaotic Lorenz-63 system, scaled to x/8, y/8, (z-25)/8 so the
    attractor is O(1); training data carries Gaussian measurement noise
    added before scaling.
``mhd``
    A six-state magnetohydrodynamics truncation (inviscid by default),
    quadratic with a conserved energy.
``burgers_dirichlet`` / ``burgers_neumann``
    Viscous Burgers on (0, 1), semi-discretized with central
    differences.  The Dirichlet variant uses the split (skew-symmetric)
    form of the convection term, whose Hessian is exactly
    energy-preserving; the Neumann variant uses the advective form with
    second-order ghost-point elimination and is not.
``chafee``
    The Chafee-Infante reaction-diffusion equation with Neumann
    boundaries, stored in lifted coordinates (u, w) = (v - 1, α(v-1)²)
    where the dynamics are exactly quadratic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, NonFinite, ShapeMismatch
from .quadtensor import QuadModel

__all__ = [
    "SimResult",
    "Dataset",
    "BenchmarkConfig",
    "rk4_step",
    "simulate",
    "default_config",
    "generate_benchmark",
    "lift_chafee",
    "unlift_chafee",
    "burgers_truth_operators",
]

DIVERGENCE_NORM = 1e12


def rk4_step(rhs, x, dt):
    """One classical Runge-Kutta step of size dt.

    Raises :class:`NonFinite` if the update produces NaN or Inf.
    """
    k1 = rhs(x)
    k2 = rhs(x + dt / 2.0 * k1)
    k3 = rhs(x + dt / 2.0 * k2)
    k4 = rhs(x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("RK4 step produced non-finite state")
    return out


@dataclass
class SimResult:
    """Integration output: snapshot rows plus a divergence flag.

    ``states`` has one row per stored time point, starting with the
    initial condition.  If the state norm exceeded ``DIVERGENCE_NORM``
    (or a step produced NaN/Inf) the trajectory is truncated at the last
    finite state and ``diverged`` is set instead of raising.
    """

    states: np.ndarray
    diverged: bool = False

    @property
    def T(self):
        return self.states.shape[0]


def simulate(model, x0, steps, dt, substeps=1):
    """Integrate a model (or raw rhs callable) for ``steps`` output steps.

    Parameters
    ----------
    model : QuadModel or callable
        Right-hand side; a :class:`QuadModel` is integrated through its
        ``rhs`` method.
    x0 : (n,) ndarray
    steps : int
        Number of dt-intervals; the result holds ``steps + 1`` rows
        unless the trajectory diverges earlier.
    dt : float
    substeps : int
        Internal RK4 steps per output interval (the stored resolution
        stays dt).

    Returns
    -------
    SimResult
    """
    rhs = model.rhs if isinstance(model, QuadModel) else model
    if substeps < 1:
        raise ConfigError(f"substeps must be >= 1, got {substeps}")
    x = np.asarray(x0, dtype=float).copy()
    out = [x.copy()]
    h = dt / substeps
    # Overflow on a diverging trajectory is an expected, guarded outcome;
    # keep numpy quiet and let the finiteness check speak.
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(int(steps)):
            try:
                for _ in range(substeps):
                    x = rk4_step(rhs, x, h)
            except NonFinite:
                return SimResult(np.array(out), diverged=True)
            if np.linalg.norm(x) > DIVERGENCE_NORM:
                return SimResult(np.array(out), diverged=True)
            out.append(x.copy())
    return SimResult(np.array(out), diverged=False)


@dataclass
class Dataset:
    """A set of equispaced-in-time trajectories with shared dt.

    ``trajectories`` holds (T, n) arrays whose rows are snapshots.
    ``truth`` carries the generating model when its dense operators are
    small enough to form.  ``derivatives`` (optional, same shapes as the
    trajectories) enables the derivative-matching training loss.
    """

    trajectories: list
    dt: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)
    truth: QuadModel = None
    derivatives: list = None

    @property
    def n(self):
        return self.trajectories[0].shape[1]

    def snapshot_matrix(self):
        """All snapshots as one n × (Σ T_k) matrix, columns are states."""
        return np.vstack(self.trajectories).T


@dataclass
class BenchmarkConfig:
    """Generator settings; ``None`` fields take benchmark defaults."""

    name: str
    grid: int = None
    time_points: int = None
    horizon: float = None
    noise_std: float = None
    seed: int = 0
    train_params: list = None
    test_params: list = None
    extras: dict = field(default_factory=dict)


_LORENZ_TEST_ICS = [(10.0, 10.0, -10.0), (100.0, -100.0, 100.0), (-500.0, 500.0, 500.0)]
_MHD_TRAIN_IC = (1.0, -0.5, 0.8, -0.3, 0.6, -0.9)
_MHD_TEST_IC = (-0.7, 0.9, -0.4, 0.8, -0.2, 0.5)
# Largest grid for which dense n x n^2 truth operators are materialized.
TRUTH_OPERATOR_GRID_CAP = 128


def default_config(name, **overrides):
    """The reference configuration of a named benchmark.

    Keyword overrides replace individual fields (desk-scale runs shrink
    ``grid``, ``time_points``, and the parameter lists).
    """
    if name == "lorenz":
        cfg = BenchmarkConfig(
            name, time_points=5000, horizon=20.0, noise_std=0.1,
            train_params=[(-8.0, 7.0, 27.0)], test_params=list(_LORENZ_TEST_ICS),
        )
    elif name == "mhd":
        cfg = BenchmarkConfig(
            name, time_points=2000, horizon=10.0, noise_std=0.0,
            train_params=[_MHD_TRAIN_IC], test_params=[_MHD_TEST_IC],
            extras={"nu": 0.0, "mu": 0.0},
        )
    elif name == "burgers_dirichlet":
        fs = [3.0 + 0.125 * k for k in range(17)]
        test = [3.5, 4.0, 4.5]
        cfg = BenchmarkConfig(
            name, grid=250, time_points=500, horizon=1.0, noise_std=0.0,
            train_params=[f for f in fs if f not in test], test_params=test,
            extras={"mu": 0.05},
        )
    elif name == "burgers_neumann":
        alphas = [round(0.8 + 0.2 * k, 10) for k in range(17)]
        test = [1.6, 2.4, 3.2]
        cfg = BenchmarkConfig(
            name, grid=1000, time_points=501, horizon=1.0, noise_std=0.0,
            train_params=[a for a in alphas if a not in test], test_params=test,
            extras={"mu": 0.05},
        )
    elif name == "chafee":
        fs = [1.0 + 2.0 * k / 12.0 for k in range(13)]
        test_idx = {3, 7, 10}  # 4th, 8th, 11th of the sorted list
        cfg = BenchmarkConfig(
            name, grid=1000, time_points=500, horizon=8.0, noise_std=0.0,
            train_params=[f for i, f in enumerate(fs) if i not in test_idx],
            test_params=[fs[i] for i in sorted(test_idx)],
            extras={"alpha": 0.5},
        )
    else:
        raise ConfigError(f"unknown benchmark {name!r}")
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    return cfg


def _fill_defaults(cfg):
    ref = default_config(cfg.name)
    for name in ("grid", "time_points", "horizon", "noise_std", "train_params", "test_params"):
        if getattr(cfg, name) is None:
            setattr(cfg, name, getattr(ref, name))
    extras = dict(ref.extras)
    extras.update(cfg.extras)
    cfg.extras = extras
    return cfg


def lorenz_truth():
    """Scaled Lorenz-63 operators (coordinates x/8, y/8, (z-25)/8)."""
    A = np.array([[-10.0, 10.0, 0.0], [3.0, -1.0, 0.0], [0.0, 0.0, -8.0 / 3.0]])
    H = np.zeros((3, 9))
    H[1, 2] = -4.0   # x z in row y  (columns 0*3+2 and 2*3+0)
    H[1, 6] = -4.0
    H[2, 1] = 4.0    # x y in row z
    H[2, 3] = 4.0
    B = np.array([0.0, 0.0, -25.0 / 3.0])
    return QuadModel(A, H, B)


def mhd_truth(nu=0.0, mu=0.0):
    """Six-state MHD truncation operators; inviscid when nu = mu = 0."""
    A = np.diag([-2.0 * nu, -5.0 * nu, -9.0 * nu, -2.0 * mu, -5.0 * mu, -9.0 * mu])
    n = 6
    H = np.zeros((n, n * n))

    def put(row, i, j, c):
        H[row, n * i + j] += c / 2.0
        H[row, n * j + i] += c / 2.0

    put(0, 1, 2, 4.0)
    put(0, 4, 5, -4.0)
    put(1, 0, 2, -7.0)
    put(1, 3, 5, 7.0)
    put(2, 0, 1, 3.0)
    put(2, 3, 4, -3.0)
    put(3, 5, 1, 2.0)
    put(3, 2, 4, -2.0)
    put(4, 3, 2, 5.0)
    put(4, 0, 5, -5.0)
    put(5, 4, 0, 9.0)
    put(5, 3, 1, -9.0)
    return QuadModel(A, H)


def burgers_truth_operators(grid, mu, bc):
    """Dense (A, H) of the semi-discrete viscous Burgers equation.

    ``bc`` is ``dirichlet`` (pinned boundary rows, split-form
    convection restricted to interior couplings — energy-preserving) or
    ``neumann`` (ghost-eliminated boundary rows, advective-form
    convection — not energy-preserving).
    """
    n = int(grid)
    h = 1.0 / (n - 1)
    A = np.zeros((n, n))
    H = np.zeros((n, n * n))
    if bc == "dirichlet":
        for j in range(1, n - 1):
            A[j, j - 1] += mu / h ** 2
            A[j, j] += -2.0 * mu / h ** 2
            A[j, j + 1] += mu / h ** 2
            c = 1.0 / (6.0 * h)
            # split form: -(1/3)[v v_z + (v^2)_z], boundary columns dropped
            if j + 1 <= n - 2:
                H[j, n * j + (j + 1)] += -c / 2.0    # x_j x_{j+1}, symmetrized
                H[j, n * (j + 1) + j] += -c / 2.0
                H[j, n * (j + 1) + (j + 1)] += -c    # x_{j+1}^2
            if j - 1 >= 1:
                H[j, n * j + (j - 1)] += c / 2.0
                H[j, n * (j - 1) + j] += c / 2.0
                H[j, n * (j - 1) + (j - 1)] += c
    elif bc == "neumann":
        for j in range(n):
            lo, hi = max(j - 1, 0), min(j + 1, n - 1)
            if j == 0:
                A[j, 1] += 2.0 * mu / h ** 2
                A[j, 0] += -2.0 * mu / h ** 2
            elif j == n - 1:
                A[j, n - 2] += 2.0 * mu / h ** 2
                A[j, n - 1] += -2.0 * mu / h ** 2
            else:
                A[j, j - 1] += mu / h ** 2
                A[j, j] += -2.0 * mu / h ** 2
                A[j, j + 1] += mu / h ** 2
                c = 1.0 / (2.0 * h)
                # advective form -v v_z, symmetrized columns
                H[j, n * j + hi] += -c / 2.0
                H[j, n * hi + j] += -c / 2.0
                H[j, n * j + lo] += c / 2.0
                H[j, n * lo + j] += c / 2.0
    else:
        raise ConfigError(f"unknown boundary condition {bc!r}")
    return A, H


def _burgers_rhs(grid, mu, bc):
    """Stencil form of :func:`burgers_truth_operators` (any grid size)."""
    n = int(grid)
    h = 1.0 / (n - 1)

    if bc == "dirichlet":
        def rhs(v):
            out = np.zeros_like(v)
            diff = (v[:-2] - 2.0 * v[1:-1] + v[2:]) * (mu / h ** 2)
            vr = v[2:].copy()
            vl = v[:-2].copy()
            vr[-1] = 0.0  # drop boundary couplings (columns pinned to 0)
            vl[0] = 0.0
            conv = (v[1:-1] * (vr - vl) + (vr ** 2 - vl ** 2)) / (6.0 * h)
            out[1:-1] = diff - conv
            return out
    else:
        def rhs(v):
            out = np.empty_like(v)
            out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) * (mu / h ** 2) \
                - v[1:-1] * (v[2:] - v[:-2]) / (2.0 * h)
            out[0] = 2.0 * mu / h ** 2 * (v[1] - v[0])
            out[-1] = 2.0 * mu / h ** 2 * (v[-2] - v[-1])
            return out

    return rhs


def _chafee_rhs(grid):
    """v_t = v - v^3 + v_zz with homogeneous Neumann boundaries."""
    n = int(grid)
    h = 1.0 / (n - 1)

    def rhs(v):
        out = np.empty_like(v)
        out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h ** 2
        out[0] = 2.0 / h ** 2 * (v[1] - v[0])
        out[-1] = 2.0 / h ** 2 * (v[-2] - v[-1])
        out += v - v ** 3
        return out

    return rhs


def lift_chafee(V, alpha=0.5):
    """Lift v-snapshots (grid × T) to the quadratic coordinates [u; w].

    u = v − 1 and w = α u²; in these coordinates the Chafee-Infante
    dynamics are exactly quadratic.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ShapeMismatch(f"expected grid x T snapshots, got {V.shape}")
    U = V - 1.0
    return np.vstack([U, alpha * U ** 2])


def unlift_chafee(X):
    """Recover v-snapshots from lifted [u; w] snapshots (top block + 1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] % 2:
        raise ShapeMismatch(f"expected 2·grid x T snapshots, got {X.shape}")
    return X[: X.shape[0] // 2] + 1.0


def _stability_substeps(dt, name, grid, extras, ic_scale):
    """Internal substep count: at least dt/10, finer for stiff diffusion."""
    limit = dt / 10.0
    if name in ("burgers_dirichlet", "burgers_neumann"):
        h = 1.0 / (grid - 1)
        limit = min(limit, 0.25 * h ** 2 / extras["mu"], 0.5 * h / max(ic_scale, 1e-12))
    elif name == "chafee":
        h = 1.0 / (grid - 1)
        limit = min(limit, 0.25 * h ** 2)
    return max(10, int(math.ceil(dt / limit)))


_PARAM_ARITY = {"lorenz": 3, "mhd": 6, "burgers_dirichlet": 1, "burgers_neumann": 1, "chafee": 1}


def _check_param_arity(name, params):
    """Benchmarks take either scalar parameters or fixed-length ICs."""
    arity = _PARAM_ARITY.get(name)
    if arity is None:
        return
    for p in params:
        width = 1 if np.ndim(p) == 0 else len(p)
        if width != arity:
            expected = "scalar parameters" if arity == 1 else f"{arity}-component initial conditions"
            raise ConfigError(f"{name} takes {expected}, got {p!r}")


def generate_benchmark(cfg):
    """Generate (train, test) :class:`Dataset` pairs for a benchmark.

    Training trajectories carry the configured measurement noise; test
    trajectories are always noiseless (they serve as the evaluation
    reference).  The generator seeds one rng per trajectory from
    (cfg.seed, split, index), so any subset is reproducible.
    """
    cfg = _fill_defaults(cfg)
    name = cfg.name
    _check_param_arity(name, cfg.train_params + cfg.test_params)
    dt = cfg.horizon / (cfg.time_points - 1)
    steps = cfg.time_points - 1

    meta = {
        "name": name,
        "horizon": cfg.horizon,
        "time_points": cfg.time_points,
        "noise_std": cfg.noise_std,
        "seed": cfg.seed,
        "train_params": list(cfg.train_params),
        "test_params": list(cfg.test_params),
    }
    meta.update(cfg.extras)

    if name == "lorenz":
        truth = lorenz_truth()
        scale = np.array([8.0, 8.0, 8.0])
        shift = np.array([0.0, 0.0, 25.0])

        def make_ic(p):
            return (np.asarray(p, dtype=float) - shift) / scale

        system, noise_scale = truth, cfg.noise_std / 8.0
        substeps = _stability_substeps(dt, name, None, cfg.extras, 1.0)
        meta["scaling"] = {"scale": scale.tolist(), "shift": shift.tolist()}
    elif name == "mhd":
        truth = mhd_truth(cfg.extras["nu"], cfg.extras["mu"])

        def make_ic(p):
            return np.asarray(p, dtype=float)

        system, noise_scale = truth, cfg.noise_std
        substeps = _stability_substeps(dt, name, None, cfg.extras, 1.0)
    elif name in ("burgers_dirichlet", "burgers_neumann"):
        bc = name.split("_")[1]
        zeta = np.linspace(0.0, 1.0, cfg.grid)
        if bc == "dirichlet":
            def make_ic(f):
                return np.sin(f * 2.0 * np.pi * zeta) * zeta * (1.0 - zeta)
        else:
            def make_ic(a):
                return a * np.cos(2.0 * np.pi * zeta) ** 2

        ic_scale = max(abs(float(np.abs(make_ic(p)).max())) for p in cfg.train_params + cfg.test_params)
        substeps = _stability_substeps(dt, name, cfg.grid, cfg.extras, ic_scale)
        truth = None
        if cfg.grid <= TRUTH_OPERATOR_GRID_CAP:
            truth = QuadModel(*burgers_truth_operators(cfg.grid, cfg.extras["mu"], bc))
        system = truth if truth is not None else _burgers_rhs(cfg.grid, cfg.extras["mu"], bc)
        noise_scale = cfg.noise_std
        meta["grid"] = cfg.grid
    elif name == "chafee":
        zeta = np.linspace(0.0, 1.0, cfg.grid)

        def make_ic(f):
            return 0.1 + f * np.sin(4.0 * np.pi * zeta) ** 2

        substeps = _stability_substeps(dt, name, cfg.grid, cfg.extras, 1.0)
        truth = None
        system = _chafee_rhs(cfg.grid)
        noise_scale = cfg.noise_std
        meta["grid"] = cfg.grid
        meta["channels"] = 2
        meta["alpha"] = cfg.extras["alpha"]
    else:
        raise ConfigError(f"unknown benchmark {name!r}")

    meta["substeps"] = substeps

    def run(params, split, noisy):
        split_code = 0 if split == "train" else 1
        trajs = []
        for idx, p in enumerate(params):
            res = simulate(system, make_ic(p), steps, dt, substeps=substeps)
            if res.diverged:
                raise NonFinite(f"{name} ground truth diverged for parameters {p!r}")
            traj = res.states
            if noisy and noise_scale > 0:
                rng = np.random.default_rng([cfg.seed, split_code, idx])
                traj = traj + rng.normal(0.0, noise_scale, size=traj.shape)
            if name == "chafee":
                traj = lift_chafee(traj.T, cfg.extras["alpha"]).T
            trajs.append(traj)
        return trajs

    train = Dataset(run(cfg.train_params, "train", True), dt, meta=dict(meta, split="train"), truth=truth)
    test = Dataset(run(cfg.test_params, "test", False), dt, meta=dict(meta, split="test"), truth=truth)
    return train, test
