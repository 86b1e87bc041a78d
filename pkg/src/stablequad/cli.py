"""Command-line pipeline: generate → fit → certify → evaluate → sweep.

Persistence formats (consumed downstream, e.g. by the figures package):

* Model JSON — ``{schema, n, method, A, H, B, m, params, basis,
  certificate, provenance}``.  Floats are serialized with shortest
  round-trip decimals, so load(save(model)) is bit-exact.
* Trajectory CSV — header ``t,x1,…,xn``, one snapshot per row, with a
  JSON sidecar carrying ``dt``, benchmark name, split, seed, substeps.
* Dataset directory — ``config.json``, ``train/``, ``test/`` and, when
  the truth operators are small enough to store, ``truth.json``.
* Evaluation report JSON and sweep CSV as written by ``evaluate`` and
  ``sweep``.

Exit codes: 0 success (and certificate valid), 1 certificate invalid,
2 usage/config error, 3 I/O failure, 4 numerical failure.
"""

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import odesim, optimize, quadtensor, reduction, stableparam
from .exceptions import (
    AllPruned,
    ConfigError,
    NonFinite,
    NonFiniteLoss,
    NonSPD,
    NotStrictlyStable,
    RankTooLarge,
    ShapeMismatch,
    SolveFailed,
    StableQuadError,
    ZeroTruth,
)
from .quadtensor import QuadModel

__all__ = ["main", "save_model", "load_model", "write_trajectory_csv", "read_trajectory_csv"]

_EXIT_OK = 0
_EXIT_INVALID = 1
_EXIT_CONFIG = 2
_EXIT_IO = 3
_EXIT_NUMERICAL = 4

_MODEL_SCHEMA = "stablequad-model-v1"
_TRUTH_MAX_DIM = 100  # skip truth.json when dense operators would be huge

_METHOD_ALIASES = {
    "opinf": "opinf_benchmark",
    "opinf_benchmark": "opinf_benchmark",
    "lasmi": "lasmi",
    "gasmi": "gasmi",
    "atrmi": "atrmi",
}

_DEFAULT_CERT_KIND = {
    "opinf_benchmark": "local",
    "lasmi": "local",
    "gasmi": "global",
    "atrmi": "trapping",
    "truth": "local",
}


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _tool_version():
    from stablequad import __version__

    return __version__


def _cert_to_jsonable(cert):
    if cert is None:
        return None
    eigs = np.atleast_1d(np.asarray(cert.eig_evidence))
    radius = cert.radius
    if radius is not None and math.isinf(radius):
        radius = "unbounded"
    return {
        "kind": cert.kind,
        "valid": bool(cert.valid),
        "eig_evidence": [[float(np.real(e)), float(np.imag(e))] for e in eigs],
        "lyapunov_Q": None if cert.lyapunov_Q is None else np.asarray(cert.lyapunov_Q).tolist(),
        "m": None if cert.m is None else np.asarray(cert.m).tolist(),
        "radius": radius,
        "residuals": {k: float(v) for k, v in cert.residuals.items()},
    }


def _params_to_jsonable(params):
    if params is None:
        return None
    if isinstance(params, dict):
        return {k: np.asarray(v).tolist() for k, v in params.items()}
    out = {}
    for name in params.__dataclass_fields__:
        out[name] = np.asarray(getattr(params, name)).tolist()
    return out


def _basis_to_jsonable(basis):
    if basis is None:
        return None
    return {
        "V": basis.V.tolist(),
        "singular_values": basis.singular_values.tolist(),
        "energy_captured": float(basis.energy_captured),
    }


def save_model(path, model, method, certificate=None, params=None, basis=None, m=None, provenance=None):
    """Write a model JSON document; arrays round-trip bit-exactly."""
    doc = {
        "schema": _MODEL_SCHEMA,
        "n": model.n,
        "method": method,
        "A": model.A.tolist(),
        "H": model.H.tolist(),
        "B": model.B.tolist(),
        "m": None if m is None else np.asarray(m, dtype=float).tolist(),
        "params": _params_to_jsonable(params),
        "basis": _basis_to_jsonable(basis),
        "certificate": _cert_to_jsonable(certificate) if not isinstance(certificate, dict) else certificate,
        "provenance": provenance or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_model(path):
    """Read a model JSON document back into library objects."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != _MODEL_SCHEMA:
        raise ConfigError(f"{path}: not a {_MODEL_SCHEMA} document")
    model = QuadModel(
        np.asarray(doc["A"], dtype=float),
        np.asarray(doc["H"], dtype=float),
        np.asarray(doc["B"], dtype=float),
    )
    basis = None
    if doc.get("basis") is not None:
        b = doc["basis"]
        V = np.asarray(b["V"], dtype=float)
        gram_err = np.abs(V.T @ V - np.eye(V.shape[1])).max()
        if gram_err > 1e-8:
            raise ConfigError(f"{path}: stored basis is not orthonormal (error {gram_err:.2e})")
        basis = reduction.PodBasis(
            V=V,
            singular_values=np.asarray(b["singular_values"], dtype=float),
            energy_captured=float(b["energy_captured"]),
        )
    m = None if doc.get("m") is None else np.asarray(doc["m"], dtype=float)
    return {
        "model": model,
        "method": doc.get("method", "unknown"),
        "basis": basis,
        "m": m,
        "certificate": doc.get("certificate"),
        "raw": doc,
    }


def write_trajectory_csv(path, times, states):
    """CSV with header t,x1,…,xn and shortest-round-trip decimals."""
    states = np.asarray(states, dtype=float)
    header = "t," + ",".join(f"x{i + 1}" for i in range(states.shape[1]))
    lines = [header]
    for t, row in zip(times, states):
        lines.append(",".join(repr(float(v)) for v in (t, *row)))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trajectory_csv(path):
    """Parse a trajectory CSV; validates the uniform time grid."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("t,"):
        raise ConfigError(f"{path}: missing t,x1,… header")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two snapshot rows")
    times, states = data[:, 0], data[:, 1:]
    dt = (times[-1] - times[0]) / (times.shape[0] - 1)
    if dt <= 0 or np.abs(np.diff(times) - dt).max() > 1e-9 * dt:
        raise ConfigError(f"{path}: time column is not a uniform increasing grid")
    return times, states


def _read_sidecar(csv_path):
    sidecar = Path(csv_path).with_suffix(".json")
    if sidecar.exists():
        return json.loads(sidecar.read_text())
    return {}


def _find_split_dir(data_dir, split):
    data_dir = Path(data_dir)
    if sorted(data_dir.glob("*.csv")):
        return data_dir
    candidate = data_dir / split
    if candidate.is_dir() and sorted(candidate.glob("*.csv")):
        return candidate
    raise ConfigError(f"{data_dir}: no trajectory CSV files found (looked in . and {split}/)")


def _read_dataset(data_dir, split):
    split_dir = _find_split_dir(data_dir, split)
    trajectories, dts, meta = [], [], {}
    for csv_path in sorted(split_dir.glob("*.csv")):
        times, states = read_trajectory_csv(csv_path)
        trajectories.append(states)
        dts.append((times[-1] - times[0]) / (times.shape[0] - 1))
        side = _read_sidecar(csv_path)
        meta.setdefault("substeps", side.get("substeps", 1))
        meta.setdefault("name", side.get("name"))
        meta.setdefault("seed", side.get("seed"))
    dt = dts[0]
    if max(abs(d - dt) for d in dts) > 1e-9 * dt:
        raise ConfigError(f"{split_dir}: trajectories disagree on dt")
    return odesim.Dataset(trajectories=trajectories, dt=float(dt), meta=meta)


def _config_hash(echo):
    return hashlib.sha256(json.dumps(echo, sort_keys=True).encode()).hexdigest()


def _print_err(message):
    print(f"stablequad: error: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def _parse_param_list(text):
    """Comma-separated scalars, or semicolon-separated component tuples."""
    groups = [g for g in text.split(";") if g.strip()]
    values = []
    for g in groups:
        parts = [float(p) for p in g.split(",") if p.strip()]
        if not parts:
            continue
        values.append(parts[0] if len(parts) == 1 else tuple(parts))
    if not values:
        raise ConfigError(f"could not parse parameter list {text!r}")
    return values


def cmd_generate(args):
    overrides = {}
    for field in ("seed", "noise_std", "grid", "horizon", "time_points"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.train_params is not None:
        overrides["train_params"] = _parse_param_list(args.train_params)
    if args.test_params is not None:
        overrides["test_params"] = _parse_param_list(args.test_params)
    cfg = odesim.default_config(args.benchmark, **overrides)
    train, test = odesim.generate_benchmark(cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dt = train.dt
    echo = {
        "benchmark": cfg.name,
        "grid": cfg.grid,
        "time_points": cfg.time_points,
        "horizon": cfg.horizon,
        "noise_std": cfg.noise_std,
        "seed": cfg.seed,
        "train_params": [list(p) if isinstance(p, tuple) else p for p in cfg.train_params],
        "test_params": [list(p) if isinstance(p, tuple) else p for p in cfg.test_params],
        "extras": cfg.extras,
        "dt": dt,
        "substeps": train.meta.get("substeps", 1),
        "state_dim": train.n,
    }
    (out / "config.json").write_text(json.dumps(echo, indent=2) + "\n")

    for split, dataset, params in (("train", train, cfg.train_params), ("test", test, cfg.test_params)):
        split_dir = out / split
        split_dir.mkdir(exist_ok=True)
        for idx, traj in enumerate(dataset.trajectories):
            times = dataset.t0 + dt * np.arange(traj.shape[0])
            stem = split_dir / f"traj_{idx:03d}"
            write_trajectory_csv(stem.with_suffix(".csv"), times, traj)
            sidecar = {
                "dt": dt,
                "name": cfg.name,
                "split": split,
                "seed": cfg.seed,
                "substeps": dataset.meta.get("substeps", 1),
                "index": idx,
                "ic_param": list(params[idx]) if isinstance(params[idx], tuple) else params[idx],
                "n": traj.shape[1],
                "time_points": traj.shape[0],
            }
            stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    truth = test.truth
    if truth is not None and truth.n <= _TRUTH_MAX_DIM:
        save_model(
            out / "truth.json",
            truth,
            "truth",
            provenance={"config_hash": _config_hash(echo), "seed": cfg.seed, "tool_version": _tool_version()},
        )
    print(f"generated {cfg.name}: {len(train.trajectories)} train / {len(test.trajectories)} test "
          f"trajectories of {cfg.time_points} points (n = {train.n}) in {out}")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _chafee_channel_split(Y, order=None, fraction=None):
    """Per-channel POD for lifted two-channel states (top/bottom halves).

    With an integer target, ranks are allocated greedily by the next
    largest singular value in either channel (at least one per channel);
    with a fraction, each channel captures that fraction on its own.
    """
    N = Y.shape[0]
    half = N // 2
    channels = [Y[:half], Y[half:]]
    if fraction is not None:
        bases = [reduction.pod_basis(C, fraction) for C in channels]
        return reduction.blockdiag_basis(bases)
    if order < 2:
        raise ConfigError("chafee block basis needs order >= 2 (one mode per channel)")
    full = [reduction.pod_basis(C, min(C.shape)) for C in channels]
    ranks = [1, 1]
    for _ in range(order - 2):
        gains = []
        for c in (0, 1):
            s = full[c].singular_values
            gains.append(s[ranks[c]] if ranks[c] < s.size else -1.0)
        ranks[gains.index(max(gains))] += 1
    bases = [reduction.pod_basis(C, r) for C, r in zip(channels, ranks)]
    return reduction.blockdiag_basis(bases)


def _compute_basis(dataset, benchmark, order, fraction):
    Y = dataset.snapshot_matrix()
    if benchmark == "chafee":
        return _chafee_channel_split(Y, order=order, fraction=fraction)
    return reduction.pod_basis(Y, order if order is not None else fraction)


def _project_dataset(dataset, basis):
    reduced = [reduction.project(traj.T, basis).T for traj in dataset.trajectories]
    return odesim.Dataset(trajectories=reduced, dt=dataset.dt, t0=dataset.t0, meta=dict(dataset.meta))


def _fit_config_from(args):
    cfg = optimize.FitConfig()
    if args.steps is not None:
        cfg.steps = args.steps
    cfg.lambda_H = args.lambda_h
    cfg.seed = args.seed
    cfg.loss_mode = args.loss_mode
    if getattr(args, "conserve_energy", False):
        cfg.conserve_energy = True
    if getattr(args, "learn_b", False):
        cfg.learn_B = True
    if getattr(args, "threshold", None) is not None:
        cfg.threshold = args.threshold
    if getattr(args, "rounds", None) is not None:
        cfg.threshold_rounds = args.rounds
    return cfg


def _fit_core(data_dir, method, cfg, order=None, energy_fraction=None, sparse=False):
    """Shared by ``fit`` and ``sweep``: load data, reduce, train."""
    dataset = _read_dataset(data_dir, "train")
    benchmark = dataset.meta.get("name")
    basis = None
    if order is not None or energy_fraction is not None:
        basis = _compute_basis(dataset, benchmark, order, energy_fraction)
        dataset = _project_dataset(dataset, basis)
    if sparse:
        model, report = optimize.sparse_fit(method, dataset, cfg)
        params = None
    else:
        model, params, report = optimize.fit(method, dataset, cfg)
    return model, params, report, basis


def _report_to_jsonable(report):
    return {
        "loss_history": [float(v) for v in report.loss_history],
        "final_loss": report.final_loss,
        "certificate": _cert_to_jsonable(report.certificate),
        "wall_time": report.wall_time,
        "pruned_mask": None
        if report.pruned_mask is None
        else {k: np.asarray(v).astype(int).tolist() for k, v in report.pruned_mask.items()},
        "config_echo": report.config_echo,
    }


def _write_fit_outputs(out_path, method, model, params, report, basis):
    out_path = Path(out_path)
    cert = report.certificate
    m = cert.m if cert is not None and cert.m is not None else None
    provenance = {
        "config_hash": _config_hash(report.config_echo),
        "seed": report.config_echo.get("seed"),
        "tool_version": _tool_version(),
    }
    save_model(out_path, model, method, certificate=cert, params=params, basis=basis, m=m,
               provenance=provenance)
    report_path = out_path.with_name(out_path.stem + ".report.json")
    report_path.write_text(json.dumps(_report_to_jsonable(report), indent=2) + "\n")
    return report_path


def cmd_fit(args):
    method = _METHOD_ALIASES.get(args.method)
    if method is None:
        raise ConfigError(f"unknown method {args.method!r}")
    cfg = _fit_config_from(args)
    try:
        model, params, report, basis = _fit_core(
            args.data, method, cfg, order=args.order, energy_fraction=args.energy_fraction,
            sparse=args.sparse,
        )
    except NonFiniteLoss as exc:
        failure = {
            "error": "NonFiniteLoss",
            "message": str(exc),
            "step": exc.step,
            "method": method,
        }
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.with_name(out_path.stem + ".report.json").write_text(
            json.dumps(failure, indent=2) + "\n"
        )
        _print_err(str(exc))
        return _EXIT_NUMERICAL
    _write_fit_outputs(args.out, method, model, params, report, basis)
    cert = report.certificate
    print(
        f"fit {method}: final loss {report.final_loss:.6e}, certificate {cert.kind} "
        f"{'valid' if cert.valid else 'INVALID'}, {report.wall_time:.1f}s -> {args.out}"
    )
    return _EXIT_OK


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def cmd_certify(args):
    loaded = load_model(args.model)
    kind = args.kind
    if kind is None and loaded["certificate"] is not None:
        kind = loaded["certificate"].get("kind")
    if kind is None:
        kind = _DEFAULT_CERT_KIND.get(loaded["method"], "local")
    Q = None
    if args.q is not None:
        Q = np.asarray(json.loads(Path(args.q).read_text()), dtype=float)
    elif loaded["certificate"] is not None and loaded["certificate"].get("lyapunov_Q") is not None:
        Q = np.asarray(loaded["certificate"]["lyapunov_Q"], dtype=float)
    cert = stableparam.certify(loaded["model"], kind, Q=Q, m=loaded["m"])

    out_path = Path(args.out) if args.out else Path(args.model).with_suffix(".certificate.json")
    out_path.write_text(json.dumps(_cert_to_jsonable(cert), indent=2) + "\n")
    abscissa = float(np.max(np.real(np.atleast_1d(cert.eig_evidence))))
    radius = "n/a" if cert.radius is None else ("unbounded" if math.isinf(cert.radius) else f"{cert.radius:.6g}")
    print(f"certificate kind      : {cert.kind}")
    print(f"valid                 : {cert.valid}")
    print(f"spectral evidence max : {abscissa:.6e}")
    print(f"radius                : {radius}")
    for name, value in cert.residuals.items():
        print(f"residual {name:<13}: {value:.6e}")
    print(f"written               : {out_path}")
    return _EXIT_OK if cert.valid else _EXIT_INVALID


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _evaluate_core(model, basis, data_dir, norm="fro", dump_dir=None):
    """Simulate from each stored IC and score against the stored states."""
    split_dir = _find_split_dir(data_dir, "test")
    csvs = sorted(split_dir.glob("*.csv"))
    per_traj = []
    errors = []
    diverged_count = 0
    for csv_path in csvs:
        times, states = read_trajectory_csv(csv_path)
        side = _read_sidecar(csv_path)
        substeps = int(side.get("substeps", 1))
        dt = float((times[-1] - times[0]) / (times.shape[0] - 1))
        full_dim = states.shape[1]
        sim_dim = basis.V.shape[0] if basis is not None else model.n
        if sim_dim != full_dim:
            raise ShapeMismatch(
                f"{csv_path.name}: data dimension {full_dim} does not match model dimension {sim_dim}"
            )
        x0 = states[0]
        if basis is not None:
            x0 = reduction.project(x0, basis)
        result = odesim.simulate(model, x0, steps=states.shape[0] - 1, dt=dt, substeps=substeps)
        learned = result.states
        if basis is not None:
            learned = reduction.unproject(learned.T, basis).T
        entry = {"file": csv_path.name, "diverged": bool(result.diverged)}
        if result.diverged or learned.shape[0] != states.shape[0]:
            entry["relative_l2"] = "unstable"
            diverged_count += 1
        else:
            err = reduction.relative_l2(states.T, learned.T, norm=norm)
            entry["relative_l2"] = float(err)
            errors.append(float(err))
            if dump_dir is not None:
                write_trajectory_csv(Path(dump_dir) / csv_path.name, times, learned)
        per_traj.append(entry)
    return {
        "norm": norm,
        "per_trajectory": per_traj,
        "mean_relative_l2": float(np.mean(errors)) if errors else None,
        "diverged_count": diverged_count,
        "num_trajectories": len(csvs),
    }


def cmd_evaluate(args):
    loaded = load_model(args.model)
    dump_dir = None
    if args.dump_sims is not None:
        dump_dir = Path(args.dump_sims)
        dump_dir.mkdir(parents=True, exist_ok=True)
    report = _evaluate_core(loaded["model"], loaded["basis"], args.data, norm=args.norm, dump_dir=dump_dir)
    report["model"] = str(args.model)
    report["data"] = str(args.data)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2) + "\n")
    mean = report["mean_relative_l2"]
    mean_text = "unstable" if mean is None else f"{mean:.6e}"
    print(
        f"evaluated {report['num_trajectories']} trajectories: mean relative l2 {mean_text}, "
        f"{report['diverged_count']} diverged -> {out_path}"
    )
    return _EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_cell(payload):
    """One (method, value) fit+evaluation; runs in a worker process."""
    args = argparse.Namespace(**payload["args"])
    method = payload["method"]
    value = payload["value"]
    cfg = _fit_config_from(args)
    order = args.order
    if payload["param"] == "lambda_h":
        cfg.lambda_H = value
    else:
        order = int(value)
    row = {
        "param": payload["param"],
        "value": value,
        "method": payload["cli_method"],
        "mean_relative_l2": "",
        "certificate_valid": "",
        "diverged_count": "",
        "status": "ok",
        "model_file": "",
    }
    try:
        model, params, report, basis = _fit_core(
            args.data, method, cfg, order=order, energy_fraction=args.energy_fraction,
        )
        model_path = Path(payload["models_dir"]) / f"{payload['cli_method']}_{payload['param']}_{value:g}.json"
        _write_fit_outputs(model_path, method, model, params, report, basis)
        eval_report = _evaluate_core(model, basis, args.data)
        mean = eval_report["mean_relative_l2"]
        row["mean_relative_l2"] = "unstable" if mean is None else repr(float(mean))
        row["certificate_valid"] = "true" if report.certificate.valid else "false"
        row["diverged_count"] = str(eval_report["diverged_count"])
        row["model_file"] = str(model_path)
    except StableQuadError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    return row


def _max_workers(num_cells):
    env = os.environ.get("STABLEQUAD_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(num_cells, cap))


def cmd_sweep(args):
    if args.param not in ("lambda_h", "order"):
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs a non-empty --values list")
    methods = [m for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in _METHOD_ALIASES:
            raise ConfigError(f"unknown method {m!r}")
    out_dir = Path(args.out)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)

    arg_fields = {
        "data": args.data,
        "steps": args.steps,
        "lambda_h": args.lambda_h,
        "order": args.order,
        "energy_fraction": args.energy_fraction,
        "loss_mode": args.loss_mode,
        "seed": args.seed,
        "conserve_energy": False,
        "learn_b": args.learn_b,
    }
    payloads = [
        {
            "args": arg_fields,
            "param": args.param,
            "value": value,
            "method": _METHOD_ALIASES[m],
            "cli_method": m,
            "models_dir": str(models_dir),
        }
        for value in values
        for m in methods
    ]

    workers = _max_workers(len(payloads))
    if workers == 1:
        rows = [_sweep_cell(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, payloads))

    columns = ["param", "value", "method", "mean_relative_l2", "certificate_valid",
               "diverged_count", "status", "model_file"]
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(
            repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns
        ))
    csv_path = out_dir / "sweep.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"sweep wrote {len(rows)} rows ({failed} failed cells) -> {csv_path}")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="stablequad",
        description="Infer stable quadratic models from trajectory data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a benchmark and write a dataset directory")
    g.add_argument("--benchmark", required=True,
                   help="lorenz, mhd, burgers_dirichlet, burgers_neumann, or chafee")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--noise-std", dest="noise_std", type=float, default=None)
    g.add_argument("--grid", type=int, default=None)
    g.add_argument("--horizon", type=float, default=None)
    g.add_argument("--time-points", dest="time_points", type=int, default=None)
    g.add_argument("--train-params", dest="train_params", default=None,
                   help="override training ICs/parameters: semicolons separate entries, "
                        "commas separate components, e.g. '3.0;3.5' (scalars) or "
                        "'1,2,3;4,5,6' (two 3-D points)")
    g.add_argument("--test-params", dest="test_params", default=None)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="train a model on a dataset directory")
    f.add_argument("--method", required=True, choices=sorted(_METHOD_ALIASES))
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--lambda-h", dest="lambda_h", type=float, default=0.0)
    f.add_argument("--steps", type=int, default=None)
    f.add_argument("--order", type=int, default=None, help="POD rank before fitting")
    f.add_argument("--energy-fraction", dest="energy_fraction", type=float, default=None)
    f.add_argument("--conserve-energy", dest="conserve_energy", action="store_true")
    f.add_argument("--sparse", action="store_true", help="sequential-thresholding fit")
    f.add_argument("--loss-mode", dest="loss_mode", choices=("rk4", "derivative"), default="rk4")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--threshold", type=float, default=None)
    f.add_argument("--rounds", type=int, default=None)
    f.add_argument("--learn-b", dest="learn_b", action="store_true",
                   help="learn a constant term in opinf_benchmark fits")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("certify", help="re-check the stability certificate of a saved model")
    c.add_argument("--model", required=True)
    c.add_argument("--kind", choices=("local", "global", "trapping", "energy_conserving"), default=None)
    c.add_argument("--q", default=None, help="JSON file holding an SPD Lyapunov matrix")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("evaluate", help="score a saved model on stored test trajectories")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--norm", choices=("fro", "spectral"), default="fro")
    e.add_argument("--dump-sims", dest="dump_sims", default=None,
                   help="directory to write the simulated trajectories as CSV")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="fit a grid of hyperparameter values across methods")
    s.add_argument("--param", required=True, choices=("lambda_h", "order"))
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--methods", default="opinf,lasmi,gasmi")
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--lambda-h", dest="lambda_h", type=float, default=0.0)
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--energy-fraction", dest="energy_fraction", type=float, default=None)
    s.add_argument("--loss-mode", dest="loss_mode", choices=("rk4", "derivative"), default="rk4")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--learn-b", dest="learn_b", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (None, 0) else int(exc.code)
    try:
        return args.func(args)
    except (ConfigError, ShapeMismatch, NonSPD, RankTooLarge, ZeroTruth) as exc:
        _print_err(str(exc))
        return _EXIT_CONFIG
    except (json.JSONDecodeError, OSError) as exc:
        _print_err(str(exc))
        return _EXIT_IO
    except (NonFiniteLoss, NonFinite, AllPruned, SolveFailed, NotStrictlyStable) as exc:
        _print_err(str(exc))
        return _EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
