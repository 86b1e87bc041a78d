"""Gradient training of quadratic models with stability built in.

Four fitting methods share one Adam/cyclic-LR loop; they differ only in
which arrays are learned and how the operators (A, H, B) are assembled
from them on the tape:

``opinf_benchmark``
    A and H (optionally B) learned directly, no stability structure.
``lasmi``
    A = (J − Jᵀ − R Rᵀ) Q with Q fixed SPD; H unconstrained.  Locally
    stable by construction.
``gasmi``
    Same linear part; H assembled from a tensor as (mat₁ − mat₂)(I ⊗ Q),
    which makes x ↦ xᵀQ H (x ⊗ x) vanish identically.  Globally stable.
``atrmi``
    The gasmi form posed in shifted coordinates x̃ = x − m with a
    learnable shift and constant term, giving an attracting trapping
    ball around m.

``sparse_fit`` wraps ``fit`` with magnitude thresholding: after each
round, assembled coefficients below the threshold are frozen to zero
and training restarts from the surviving values.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd, quadtensor, stableparam
from .exceptions import AllPruned, ConfigError, NonFiniteLoss
from .quadtensor import QuadModel
from .stableparam import AtrParams, GasParams, LasParams, certify

__all__ = [
    "FitConfig",
    "FitReport",
    "AdamState",
    "cyclic_lr",
    "adam_step",
    "fit",
    "sparse_fit",
]

_METHODS = ("opinf_benchmark", "lasmi", "gasmi", "atrmi")
_BETA1 = 0.9
_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass
class FitConfig:
    """Training hyperparameters; defaults match the reference setup."""

    steps: int = 12000
    lr_min: float = 1e-6
    lr_max: float = 1e-2
    lr_cycle: int = 4000
    init_std: float = 0.1
    lambda_H: float = 0.0
    threshold: float = 0.1
    threshold_rounds: int = 4
    loss_mode: str = "rk4"
    seed: int = 0
    fixed_Q: np.ndarray = None  # None means identity
    conserve_energy: bool = False
    learn_B: bool = False


@dataclass
class FitReport:
    """What a fit did: loss trace, certificate, timing, and echoes."""

    loss_history: np.ndarray
    final_loss: float
    certificate: stableparam.StabilityCertificate
    wall_time: float
    pruned_mask: dict = None
    config_echo: dict = field(default_factory=dict)


@dataclass
class AdamState:
    params: dict
    m: dict
    v: dict
    t: int = 0


def cyclic_lr(step, cfg):
    """Triangular schedule from lr_min up to lr_max and back per cycle."""
    pos = step % cfg.lr_cycle
    half = cfg.lr_cycle / 2.0
    frac = pos / half if pos <= half else (cfg.lr_cycle - pos) / half
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * frac


def adam_step(state, grads, lr):
    """One bias-corrected Adam update; mutates and returns ``state``."""
    state.t += 1
    b1c = 1.0 - _BETA1 ** state.t
    b2c = 1.0 - _BETA2 ** state.t
    for name, g in grads.items():
        state.m[name] = _BETA1 * state.m[name] + (1.0 - _BETA1) * g
        state.v[name] = _BETA2 * state.v[name] + (1.0 - _BETA2) * (g * g)
        m_hat = state.m[name] / b1c
        v_hat = state.v[name] / b2c
        state.params[name] = state.params[name] - lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
    return state


def _param_names(method, cfg):
    if method == "opinf_benchmark":
        names = ["A", "H"]
        if cfg.learn_B:
            names.append("B")
        return names
    names = ["J_raw"]
    if not cfg.conserve_energy:
        names.append("R_fac")
    if method == "lasmi":
        names.append("H_free")
    else:
        names.append("H_ten")
    if method == "atrmi" and not cfg.conserve_energy:
        # conserve_energy pins the dissipation factor, the shift, and the
        # constant term at zero: any of them would change ½‖x‖² in time.
        names.extend(["m", "B_tilde"])
    return names


def _param_shapes(method, n):
    return {
        "A": (n, n),
        "H": (n, n * n),
        "B": (n,),
        "J_raw": (n, n),
        "R_fac": (n, n),
        "H_free": (n, n * n),
        "H_ten": (n, n, n),
        "m": (n,),
        "B_tilde": (n,),
    }


def _as_float_masks(masks, n):
    out = {}
    for key, shape in (("A", (n, n)), ("H", (n, n * n)), ("B", (n,))):
        m = masks.get(key) if masks else None
        out[key] = np.ones(shape) if m is None else np.asarray(m, dtype=float)
        if out[key].shape != shape:
            raise ConfigError(f"mask {key} has shape {out[key].shape}, expected {shape}")
    return out


def _build_operators(tape, method, leaves, M, mask_arrays):
    """Assemble (A, H, B) tape variables for one training step."""
    n = M.shape[0]
    B = np.zeros(n)
    if method == "opinf_benchmark":
        A, H = leaves["A"], leaves["H"]
        if "B" in leaves:
            B = leaves["B"]
    else:
        J = leaves["J_raw"]
        S = tape.mat_sub(J, tape.transpose(J))
        if "R_fac" in leaves:
            R = leaves["R_fac"]
            S = tape.mat_sub(S, tape.mat_mul(R, tape.transpose(R)))
        A = tape.mat_mul(S, M)
        if method == "lasmi":
            H = leaves["H_free"]
        else:
            H = tape.block_rmul(tape.skew_unfold(leaves["H_ten"]), M)
            if method == "atrmi" and "m" in leaves:
                m, B_t = leaves["m"], leaves["B_tilde"]
                A_shift = A
                A = tape.mat_sub(
                    tape.mat_sub(A_shift, tape.contract_right(H, m)),
                    tape.contract_left(H, m),
                )
                B = tape.mat_sub(
                    tape.mat_add(B_t, tape.contract_both(H, m)),
                    tape.mat_mul(A_shift, m),
                )
    if mask_arrays is not None:
        A = tape.mask(A, mask_arrays["A"])
        H = tape.mask(H, mask_arrays["H"])
        B = tape.mask(B, mask_arrays["B"]) if isinstance(B, autograd.Var) else B * mask_arrays["B"]
    return A, H, B


def _build_loss(tape, method, leaves, M, mask_arrays, cfg, data):
    A, H, B = _build_operators(tape, method, leaves, M, mask_arrays)
    if cfg.loss_mode == "rk4":
        X0, X1, dt = data
        X_pred = autograd.rk4_through(tape, A, H, B, X0, dt)
        residual = tape.mat_sub(X1, X_pred)
    else:
        X_all, X_dot = data
        K = quadtensor.colwise_kron(X_all)
        rhs = tape.add_col(tape.mat_add(tape.mat_mul(A, X_all), tape.mat_mul(H, K)), B)
        residual = tape.mat_sub(X_dot, rhs)
    loss = tape.frobenius_sq(residual)
    if cfg.lambda_H > 0.0:
        loss = tape.mat_add(loss, tape.scale(tape.l1_mean(H), cfg.lambda_H))
    return loss


def _training_data(dataset, cfg):
    if cfg.loss_mode == "rk4":
        starts, stops = [], []
        for traj in dataset.trajectories:
            if traj.shape[0] >= 2:
                starts.append(traj[:-1])
                stops.append(traj[1:])
        if not starts:
            raise ConfigError("dataset has no snapshot pairs to train on")
        return np.vstack(starts).T, np.vstack(stops).T, float(dataset.dt)
    if cfg.loss_mode == "derivative":
        if dataset.derivatives is None:
            raise ConfigError("derivative loss mode needs dataset.derivatives")
        X_all = np.vstack(dataset.trajectories).T
        X_dot = np.vstack(dataset.derivatives).T
        if X_all.shape != X_dot.shape:
            raise ConfigError("derivatives do not match trajectory snapshots")
        return X_all, X_dot
    raise ConfigError(f"unknown loss_mode {cfg.loss_mode!r}")


def _gram_factor(cfg, n):
    """Cholesky factor of the fixed Lyapunov matrix (identity by default)."""
    if cfg.fixed_Q is None:
        return np.eye(n)
    Q = quadtensor._require_spd(cfg.fixed_Q, "fixed_Q")
    if Q.shape[0] != n:
        raise ConfigError(f"fixed_Q is {Q.shape[0]}×{Q.shape[0]}, data dimension is {n}")
    return np.linalg.cholesky(Q)


def _assemble_final(method, params, Q_fac, mask_arrays, n):
    """Numpy assembly of the final model plus the typed parameter bundle."""
    zeros_R = np.zeros((n, n))
    if method == "opinf_benchmark":
        model = QuadModel(
            params["A"].copy(),
            params["H"].copy(),
            params["B"].copy() if "B" in params else np.zeros(n),
        )
        params_obj = {k: v.copy() for k, v in params.items()}
    elif method == "lasmi":
        params_obj = LasParams(
            J_raw=params["J_raw"].copy(),
            R_fac=params.get("R_fac", zeros_R).copy(),
            Q_fac=Q_fac.copy(),
            H_free=params["H_free"].copy(),
        )
        model = stableparam.assemble_las(params_obj)
    elif method == "gasmi":
        params_obj = GasParams(
            J_raw=params["J_raw"].copy(),
            R_fac=params.get("R_fac", zeros_R).copy(),
            Q_fac=Q_fac.copy(),
            H_ten=params["H_ten"].copy(),
        )
        model = stableparam.assemble_gas(params_obj)
    else:
        params_obj = AtrParams(
            J_raw=params["J_raw"].copy(),
            R_fac=params.get("R_fac", zeros_R).copy(),
            Q_fac=Q_fac.copy(),
            H_ten=params["H_ten"].copy(),
            m=params.get("m", np.zeros(n)).copy(),
            B_tilde=params.get("B_tilde", np.zeros(n)).copy(),
        )
        model = stableparam.assemble_atr(params_obj)
    if mask_arrays is not None:
        model = QuadModel(
            model.A * mask_arrays["A"],
            model.H * mask_arrays["H"],
            model.B * mask_arrays["B"],
        )
    return model, params_obj


def _certify_fit(method, model, M, params, cfg):
    if method == "opinf_benchmark":
        return certify(model, "local")
    if cfg.conserve_energy:
        m = params.get("m") if method == "atrmi" else None
        return certify(model, "energy_conserving", Q=M, m=m)
    if method == "lasmi":
        return certify(model, "local", Q=M)
    if method == "gasmi":
        return certify(model, "global", Q=M)
    return certify(model, "trapping", Q=M, m=params["m"])


def _config_echo(method, cfg):
    echo = {
        "method": method,
        "steps": cfg.steps,
        "lr_min": cfg.lr_min,
        "lr_max": cfg.lr_max,
        "lr_cycle": cfg.lr_cycle,
        "init_std": cfg.init_std,
        "lambda_H": cfg.lambda_H,
        "threshold": cfg.threshold,
        "threshold_rounds": cfg.threshold_rounds,
        "loss_mode": cfg.loss_mode,
        "seed": cfg.seed,
        "fixed_Q": "identity" if cfg.fixed_Q is None else np.asarray(cfg.fixed_Q).tolist(),
        "conserve_energy": cfg.conserve_energy,
        "learn_B": cfg.learn_B,
    }
    return echo


def _validate(method, cfg):
    if method not in _METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {_METHODS}")
    if cfg.steps < 0:
        raise ConfigError("steps must be non-negative")
    if cfg.lr_cycle < 2:
        raise ConfigError("lr_cycle must be at least 2")
    if cfg.loss_mode not in ("rk4", "derivative"):
        raise ConfigError(f"unknown loss_mode {cfg.loss_mode!r}")
    if cfg.threshold < 0.0:
        raise ConfigError("threshold must be non-negative")
    if cfg.threshold_rounds < 1:
        raise ConfigError("threshold_rounds must be at least 1")


def fit(method, dataset, cfg=None, masks=None, init_params=None, callback=None):
    """Train one model and certify the result.

    Parameters
    ----------
    method : str
        ``opinf_benchmark``, ``lasmi``, ``gasmi``, or ``atrmi``.
    dataset : odesim.Dataset
    cfg : FitConfig, optional
    masks : dict, optional
        Boolean (or 0/1) arrays under keys "A", "H", "B"; masked entries
        of the assembled operators are held at zero throughout.
    init_params : dict, optional
        Starting values by parameter name; anything missing is drawn
        from N(0, init_std²) with the configured seed.
    callback : callable(step, params), optional
        Invoked after every update with the current parameter arrays.

    Returns
    -------
    (QuadModel, params, FitReport)
        ``params`` is a LasParams/GasParams/AtrParams bundle, or a plain
        dict for ``opinf_benchmark``.

    Raises
    ------
    NonFiniteLoss
        If the loss leaves the reals; the step index is attached.
    """
    cfg = cfg if cfg is not None else FitConfig()
    _validate(method, cfg)
    n = dataset.n
    data = _training_data(dataset, cfg)
    Q_fac = _gram_factor(cfg, n)
    M = Q_fac @ Q_fac.T
    mask_arrays = _as_float_masks(masks, n) if masks is not None else None

    names = _param_names(method, cfg)
    shapes = _param_shapes(method, n)
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name in names:
        if init_params is not None and name in init_params:
            params[name] = np.asarray(init_params[name], dtype=float).copy()
        else:
            params[name] = rng.normal(0.0, cfg.init_std, shapes[name])

    state = AdamState(
        params=params,
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )
    history = np.empty(cfg.steps)
    t_start = time.perf_counter()
    for step in range(cfg.steps):
        tape = autograd.Tape()
        leaves = {k: tape.leaf(state.params[k]) for k in names}
        loss_var = _build_loss(tape, method, leaves, M, mask_arrays, cfg, data)
        loss_val = float(loss_var.value)
        if not np.isfinite(loss_val):
            raise NonFiniteLoss(step)
        history[step] = loss_val
        grads = dict(zip(names, tape.gradients(loss_var, [leaves[k] for k in names])))
        adam_step(state, grads, cyclic_lr(step, cfg))
        if callback is not None:
            callback(step, dict(state.params))

    tape = autograd.Tape()
    leaves = {k: tape.leaf(state.params[k]) for k in names}
    final_loss = float(_build_loss(tape, method, leaves, M, mask_arrays, cfg, data).value)
    if not np.isfinite(final_loss):
        raise NonFiniteLoss(cfg.steps)

    model, params_obj = _assemble_final(method, state.params, Q_fac, mask_arrays, n)
    cert = _certify_fit(method, model, M, state.params, cfg)
    report = FitReport(
        loss_history=history,
        final_loss=final_loss,
        certificate=cert,
        wall_time=time.perf_counter() - t_start,
        pruned_mask=None if mask_arrays is None else {k: v != 0.0 for k, v in mask_arrays.items()},
        config_echo=_config_echo(method, cfg),
    )
    return model, params_obj, report


def _learnables_from(method, params_obj, cfg):
    if method == "opinf_benchmark":
        return dict(params_obj)
    out = {"J_raw": params_obj.J_raw}
    if not cfg.conserve_energy:
        out["R_fac"] = params_obj.R_fac
    if method == "lasmi":
        out["H_free"] = params_obj.H_free
    else:
        out["H_ten"] = params_obj.H_ten
    if method == "atrmi" and not cfg.conserve_energy:
        out["m"] = params_obj.m
        out["B_tilde"] = params_obj.B_tilde
    return out


def _threshold_masks(method, model, threshold):
    """Keep-masks from assembled coefficient magnitudes.

    For the tensor-parameterized methods the H mask is symmetrized so a
    skew pair (entries (i, j) and (j, i) of a block) is pruned jointly
    and the blocks stay skew-symmetric.
    """
    n = model.n
    keep_H = np.abs(model.H) >= threshold
    if method in ("gasmi", "atrmi"):
        H3 = keep_H.reshape(n, n, n)
        H3 = H3 & H3.transpose(2, 1, 0)
        keep_H = H3.reshape(n, n * n)
    return {
        "A": np.abs(model.A) >= threshold,
        "H": keep_H,
        "B": np.abs(model.B) >= threshold,
    }


def sparse_fit(method, dataset, cfg=None, callback=None):
    """Alternate training rounds with magnitude pruning.

    Runs ``cfg.threshold_rounds`` rounds of ``fit``; after each round,
    assembled coefficients with magnitude below ``cfg.threshold`` are
    masked to zero (a pruned coefficient never comes back).  The final
    model is the last round's parameters under the final masks.

    Raises
    ------
    AllPruned
        If a round removes every coefficient.
    """
    cfg = cfg if cfg is not None else FitConfig()
    _validate(method, cfg)
    n = dataset.n
    t_start = time.perf_counter()
    masks = None
    init = None
    last_report = None
    for rnd in range(cfg.threshold_rounds):
        model, params_obj, last_report = fit(
            method, dataset, cfg, masks=masks, init_params=init, callback=callback
        )
        init = _learnables_from(method, params_obj, cfg)
        masks = _threshold_masks(method, model, cfg.threshold)
        if not (masks["A"].any() or masks["H"].any() or masks["B"].any()):
            raise AllPruned(f"threshold round {rnd + 1} pruned every coefficient")

    Q_fac = _gram_factor(cfg, n)
    mask_arrays = _as_float_masks(masks, n)
    model, _ = _assemble_final(method, init, Q_fac, mask_arrays, n)
    cert = _certify_fit(method, model, Q_fac @ Q_fac.T, init, cfg)
    report = FitReport(
        loss_history=last_report.loss_history,
        final_loss=last_report.final_loss,
        certificate=cert,
        wall_time=time.perf_counter() - t_start,
        pruned_mask={k: v.copy() for k, v in masks.items()},
        config_echo=_config_echo(method, cfg),
    )
    return model, report
