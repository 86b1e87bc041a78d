"""Build and save the seven figure kinds from stablequad output files.

Every kind is a pure function of its input files: building a figure
never mutates the inputs, and saving with the same style seed writes
byte-identical images.
"""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import PathCollection

from .io import SchemaError, read_model, read_sweep, read_trajectory, sweep_curves

KINDS = (
    "singular_decay",
    "error_vs_lambda",
    "error_vs_order",
    "trajectory_heatmap",
    "phase3d",
    "eig_circle",
    "energy_trace",
)


@dataclass
class FigureSpec:
    """What to draw: a kind, its input files, and the image path."""

    kind: str
    inputs: list = field(default_factory=list)
    out: str = ""


def _require_inputs(spec, minimum=1, maximum=None):
    count = len(spec.inputs)
    if count < minimum or (maximum is not None and count > maximum):
        expected = f"at least {minimum}" if maximum is None else f"exactly {minimum}"
        raise SchemaError(f"{spec.kind}: takes {expected} input file(s), got {count}")


def _stacked_states(paths):
    """All snapshots of several trajectory files, one state per column."""
    blocks, width = [], None
    for path in paths:
        _, states = read_trajectory(path)
        if width is None:
            width = states.shape[1]
        elif states.shape[1] != width:
            raise SchemaError(
                f"{path}: state dimension {states.shape[1]} differs from {width}"
            )
        blocks.append(states)
    return np.vstack(blocks).T


def _singular_decay(spec):
    _require_inputs(spec)
    X = _stacked_states(spec.inputs)
    s = np.linalg.svd(X, compute_uv=False)
    energy = np.cumsum(s**2) / np.sum(s**2)
    index = np.arange(1, s.size + 1)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(index, s, marker=".", color="tab:blue")
    ax.set_xlabel("mode")
    ax.set_ylabel("singular value", color="tab:blue")
    twin = ax.twinx()
    twin.plot(index, energy, marker=".", linestyle="--", color="tab:orange")
    twin.set_ylabel("cumulative energy fraction", color="tab:orange")
    twin.set_ylim(0.0, 1.05)
    ax.set_title(f"singular value decay ({X.shape[1]} snapshots)")
    return fig


def _error_sweep(spec, param, xlabel, log_x):
    _require_inputs(spec, 1, 1)
    curves = sweep_curves(read_sweep(spec.inputs[0]), param)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method in sorted(curves):
        values, errors = curves[method]
        ax.plot(values, errors, marker="o", label=method)
    if log_x:
        ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean relative L2 error")
    ax.grid(True, which="both", alpha=0.3)
    if curves:
        ax.legend()
    ax.set_title(f"test error vs {xlabel}")
    return fig


def _trajectory_heatmap(spec):
    _require_inputs(spec, 1, 1)
    times, states = read_trajectory(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    mesh = ax.imshow(
        states.T,
        aspect="auto",
        origin="lower",
        extent=(float(times[0]), float(times[-1]), 0.5, states.shape[1] + 0.5),
        cmap="viridis",
    )
    fig.colorbar(mesh, ax=ax, label="state value")
    ax.set_xlabel("time")
    ax.set_ylabel("state index")
    ax.set_title(Path(spec.inputs[0]).stem)
    return fig


def _phase3d(spec):
    _require_inputs(spec, 1, 1)
    _, states = read_trajectory(spec.inputs[0])
    if states.shape[1] < 3:
        raise SchemaError(
            f"{spec.inputs[0]}: a 3-D phase portrait needs at least three states, "
            f"got {states.shape[1]}"
        )
    fig = plt.figure(figsize=(6.0, 5.0))
    ax = fig.add_subplot(projection="3d")
    ax.plot(states[:, 0], states[:, 1], states[:, 2], linewidth=0.7)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_zlabel("x3")
    ax.set_title(Path(spec.inputs[0]).stem)
    return fig


def normalized_spectrum(A):
    """Eigenvalues projected onto the unit circle (zero stays at zero).

    The projection keeps each eigenvalue's angle — in particular the
    sign of its real part — so left-half-plane spectra stay strictly
    left of the imaginary axis.
    """
    eigs = np.linalg.eigvals(np.asarray(A, dtype=float))
    mags = np.abs(eigs)
    out = np.zeros_like(eigs)
    nonzero = mags > 0.0
    out[nonzero] = eigs[nonzero] / mags[nonzero]
    return out


def _eig_circle(spec):
    _require_inputs(spec, 1, 1)
    doc = read_model(spec.inputs[0])
    points = normalized_spectrum(doc["A"])

    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    ax.plot(np.cos(theta), np.sin(theta), color="0.6", linewidth=0.8)
    ax.axvline(0.0, color="0.6", linewidth=0.8, linestyle="--")
    ax.scatter(points.real, points.imag, color="tab:red", zorder=3)
    ax.set_aspect("equal")
    ax.set_xlim(-1.2, 1.2)
    ax.set_ylim(-1.2, 1.2)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(f"spectrum direction of A ({doc.get('method', 'model')})")
    return fig


def _energy_trace(spec):
    _require_inputs(spec)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for path in spec.inputs:
        times, states = read_trajectory(path)
        energy = 0.5 * np.sum(states**2, axis=1)
        ax.plot(times, energy, label=Path(path).stem)
    ax.set_xlabel("time")
    ax.set_ylabel("energy  0.5 ||x||^2")
    ax.legend(fontsize="small")
    ax.set_title("energy along trajectories")
    return fig


_BUILDERS = {
    "singular_decay": _singular_decay,
    "error_vs_lambda": lambda spec: _error_sweep(spec, "lambda_h", "regularization weight", True),
    "error_vs_order": lambda spec: _error_sweep(spec, "order", "model order", False),
    "trajectory_heatmap": _trajectory_heatmap,
    "phase3d": _phase3d,
    "eig_circle": _eig_circle,
    "energy_trace": _energy_trace,
}


def build(spec):
    """Build the figure for a spec without saving it."""
    builder = _BUILDERS.get(spec.kind)
    if builder is None:
        raise SchemaError(f"unknown figure kind {spec.kind!r} (choose from {', '.join(KINDS)})")
    return builder(spec)


def render(spec, style_seed=0):
    """Build and save a spec; same spec and seed give identical bytes."""
    fig = build(spec)
    try:
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context({"svg.hashsalt": str(style_seed)}):
            if out.suffix.lower() == ".svg":
                fig.savefig(out, metadata={"Date": None})
            else:
                fig.savefig(out)
    finally:
        plt.close(fig)
    return out


def scatter_points(fig):
    """All scatter-marker positions in a figure, as an (N, 2) array."""
    chunks = [
        np.asarray(coll.get_offsets())
        for ax in fig.axes
        for coll in ax.collections
        if isinstance(coll, PathCollection)
    ]
    chunks = [c for c in chunks if c.size]
    return np.vstack(chunks) if chunks else np.empty((0, 2))


def close(fig):
    plt.close(fig)
