"""Unit tests for RK4 integration and benchmark data generation."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from stablequad import odesim, quadtensor
from stablequad.exceptions import ConfigError, NonFinite, ShapeMismatch
from stablequad.quadtensor import QuadModel


def linear_model(A):
    n = A.shape[0]
    return QuadModel(A, np.zeros((n, n * n)))


class TestRk4Step:
    def test_hand_computed_decay_step(self):
        out = odesim.rk4_step(lambda x: -x, np.array([1.0]), 0.1)
        # 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
        assert_allclose(out, [0.9048375], rtol=0, atol=1e-12)
        assert abs(out[0] - math.exp(-0.1)) < 1e-7

    def test_zero_rhs_is_identity(self):
        x = np.array([3.0, -2.0])
        assert_allclose(odesim.rk4_step(lambda v: np.zeros_like(v), x, 0.5), x)

    def test_constant_rhs_is_euler_exact(self):
        c = np.array([2.0, -1.0])
        x = np.array([0.5, 0.5])
        assert_allclose(odesim.rk4_step(lambda v: c, x, 0.25), x + 0.25 * c)

    def test_nonfinite_stage_raises(self):
        with pytest.raises(NonFinite):
            odesim.rk4_step(lambda v: v * np.inf, np.array([1.0]), 0.1)

    def test_order_four_convergence(self):
        # Global error at t = 1 for dx/dt = -x shrinks ~16x per halving.
        errors = []
        for dt in (0.1, 0.05, 0.025):
            x = np.array([1.0])
            for _ in range(round(1.0 / dt)):
                x = odesim.rk4_step(lambda v: -v, x, dt)
            errors.append(abs(x[0] - math.exp(-1.0)))
        for e_coarse, e_fine in zip(errors, errors[1:]):
            ratio = e_coarse / e_fine
            assert 16.0 * 0.8 <= ratio <= 16.0 * 1.2


class TestSimulate:
    def test_linear_decay_matches_closed_form(self):
        model = linear_model(-np.eye(2))
        res = odesim.simulate(model, np.array([1.0, 1.0]), 10, 0.1)
        assert not res.diverged
        assert res.states.shape == (11, 2)
        # Ten compounded steps of the 0.9048375 factor land 3.3e-7 off
        # the exact exp(-1); the per-step truncation alone is 8e-8.
        assert_allclose(res.states[10], math.exp(-1.0) * np.ones(2), atol=5e-7)

    def test_zero_steps_returns_initial_row(self):
        model = linear_model(-np.eye(2))
        res = odesim.simulate(model, np.array([2.0, 3.0]), 0, 0.1)
        assert res.states.shape == (1, 2)
        assert_allclose(res.states[0], [2.0, 3.0])

    def test_unstable_system_sets_divergence_flag(self):
        model = linear_model(np.eye(2))
        res = odesim.simulate(model, np.array([1.0, 1.0]), 10000, 0.5)
        assert res.diverged
        assert res.states.shape[0] < 10001
        assert np.all(np.isfinite(res.states))

    def test_substeps_refine_without_changing_grid(self):
        model = linear_model(-np.eye(1))
        coarse = odesim.simulate(model, np.array([1.0]), 10, 0.1)
        fine = odesim.simulate(model, np.array([1.0]), 10, 0.1, substeps=10)
        assert fine.states.shape == coarse.states.shape
        exact = np.exp(-0.1 * np.arange(11))
        assert abs(fine.states[:, 0] - exact).max() < abs(
            coarse.states[:, 0] - exact
        ).max()

    def test_raw_callable_rhs_accepted(self):
        res = odesim.simulate(lambda x: -x, np.array([1.0]), 5, 0.1)
        assert res.states.shape == (6, 1)

    def test_bad_substeps_rejected(self):
        with pytest.raises(ConfigError):
            odesim.simulate(linear_model(-np.eye(1)), np.array([1.0]), 1, 0.1, substeps=0)


class TestTruthOperators:
    def test_scaled_chaotic_rhs_at_reference_point(self):
        # In raw coordinates the rhs at (-8, 7, 27) is (150, -15, -128);
        # after the x/8, y/8, (z-25)/8 change of variables the same state
        # is (-1, 0.875, 0.25) and the rhs picks up the 1/8 factor.
        model = odesim.lorenz_truth()
        out = model.rhs(np.array([-1.0, 0.875, 0.25]))
        assert_allclose(out, [150.0 / 8.0, -15.0 / 8.0, -128.0 / 8.0], atol=1e-12)

    def test_scaled_chaotic_support_count(self):
        model = odesim.lorenz_truth()
        Hs = quadtensor.symmetrize_H(model.H)
        support = (
            int(np.count_nonzero(model.A))
            + int(np.count_nonzero(Hs))
            + int(np.count_nonzero(model.B))
        )
        assert int(np.count_nonzero(model.A)) == 5
        assert int(np.count_nonzero(Hs)) == 4
        assert int(np.count_nonzero(model.B)) == 1
        assert support == 10

    def test_mhd_inviscid_has_zero_linear_part(self):
        model = odesim.mhd_truth()
        assert_allclose(model.A, np.zeros((6, 6)))
        assert quadtensor.energy_preserving_residual(model.H) < 1e-12

    def test_mhd_viscous_linear_part(self):
        model = odesim.mhd_truth(nu=0.1, mu=0.2)
        assert_allclose(np.diag(model.A), [-0.2, -0.5, -0.9, -0.4, -1.0, -1.8])

    def test_diffusive_truth_is_energy_preserving_only_for_pinned_bc(self):
        _, H_pinned = odesim.burgers_truth_operators(32, 0.05, "dirichlet")
        _, H_flux = odesim.burgers_truth_operators(32, 0.05, "neumann")
        assert quadtensor.energy_preserving_residual(H_pinned) < 1e-10
        assert quadtensor.energy_preserving_residual(H_flux) > 1e-3

    def test_truth_operators_match_stencil_rhs(self):
        rng = np.random.default_rng(0)
        for bc in ("dirichlet", "neumann"):
            A, H = odesim.burgers_truth_operators(24, 0.05, bc)
            model = QuadModel(A, H)
            stencil = odesim._burgers_rhs(24, 0.05, bc)
            for _ in range(5):
                v = rng.standard_normal(24)
                if bc == "dirichlet":
                    v[0] = v[-1] = 0.0
                assert_allclose(model.rhs(v), stencil(v), atol=1e-12)


class TestGenerateBenchmark:
    def test_chaotic_initial_row_is_scaled_ic(self):
        cfg = odesim.default_config("lorenz", noise_std=0.0, time_points=50, horizon=0.2)
        train, test = odesim.generate_benchmark(cfg)
        assert_allclose(train.trajectories[0][0], [-1.0, 0.875, 0.25], atol=1e-14)
        assert len(test.trajectories) == 3
        assert train.truth is not None

    def test_noise_applies_to_train_split_only(self):
        cfg_a = odesim.default_config("lorenz", time_points=50, horizon=0.2, seed=0)
        cfg_b = odesim.default_config("lorenz", time_points=50, horizon=0.2, seed=1)
        train_a, test_a = odesim.generate_benchmark(cfg_a)
        train_b, test_b = odesim.generate_benchmark(cfg_b)
        assert not np.array_equal(train_a.trajectories[0], train_b.trajectories[0])
        assert np.array_equal(test_a.trajectories[0], test_b.trajectories[0])

    def test_scaled_coordinates_are_normalized(self):
        train, _ = odesim.generate_benchmark(odesim.default_config("lorenz"))
        traj = train.trajectories[0]
        assert traj.shape == (5000, 3)
        assert np.all(np.abs(traj.mean(axis=0)) < 0.5)
        assert np.all((traj.std(axis=0) > 0.5) & (traj.std(axis=0) < 2.0))

    def test_determinism_is_bitwise(self):
        cfg = odesim.default_config("lorenz", time_points=40, horizon=0.2)
        first, _ = odesim.generate_benchmark(cfg)
        cfg2 = odesim.default_config("lorenz", time_points=40, horizon=0.2)
        second, _ = odesim.generate_benchmark(cfg2)
        assert np.array_equal(first.trajectories[0], second.trajectories[0])

    def test_conservative_benchmark_has_constant_energy(self):
        train, test = odesim.generate_benchmark(odesim.default_config("mhd"))
        for ds in (train, test):
            for traj in ds.trajectories:
                assert traj.shape[1] == 6
                e = 0.5 * np.sum(traj ** 2, axis=1)
                assert np.abs(e - e[0]).max() / e[0] < 1e-6

    def test_pinned_boundary_rows_stay_zero(self):
        cfg = odesim.default_config(
            "burgers_dirichlet", grid=32, time_points=40, horizon=0.4,
            train_params=[3.0, 4.0], test_params=[3.5],
        )
        train, test = odesim.generate_benchmark(cfg)
        for traj in train.trajectories + test.trajectories:
            assert np.abs(traj[:, 0]).max() == 0.0
            assert np.abs(traj[:, -1]).max() == 0.0
        assert train.truth is not None  # dense operators at desk scale
        assert train.meta["substeps"] >= 10

    def test_large_grid_skips_dense_truth(self):
        cfg = odesim.default_config(
            "burgers_neumann", grid=200, time_points=20, horizon=0.1,
            train_params=[0.8], test_params=[1.6],
        )
        train, _ = odesim.generate_benchmark(cfg)
        assert train.truth is None
        assert train.trajectories[0].shape == (20, 200)

    def test_lifted_benchmark_doubles_state(self):
        cfg = odesim.default_config(
            "chafee", grid=64, time_points=30, horizon=0.5,
            train_params=[1.0, 2.0], test_params=[3.0],
        )
        train, _ = odesim.generate_benchmark(cfg)
        assert train.trajectories[0].shape == (30, 128)
        assert train.meta["channels"] == 2
        # Lifted pairs satisfy w = alpha * u^2 exactly.
        traj = train.trajectories[0]
        u, w = traj[:, :64], traj[:, 64:]
        assert np.abs(w - 0.5 * u ** 2).max() < 1e-14

    def test_split_sizes_follow_reference_protocol(self):
        cfg = odesim.default_config("burgers_dirichlet")
        assert len(cfg.train_params) == 14
        assert cfg.test_params == [3.5, 4.0, 4.5]
        assert cfg.grid == 250 and cfg.time_points == 500

        cfg = odesim.default_config("burgers_neumann")
        assert len(cfg.train_params) == 14
        assert cfg.test_params == [1.6, 2.4, 3.2]
        assert cfg.grid == 1000 and cfg.time_points == 501

        cfg = odesim.default_config("chafee")
        assert len(cfg.train_params) == 10
        # 4th, 8th and 11th of the 13 equidistant parameters in [1, 3].
        assert_allclose(cfg.test_params, [1.5, 2.0 + 1.0 / 6.0, 2.0 + 2.0 / 3.0])

    def test_unknown_benchmark_rejected(self):
        with pytest.raises(ConfigError):
            odesim.default_config("heat")
        with pytest.raises(ConfigError):
            odesim.default_config("lorenz", grid_points=10)

    def test_parameter_arity_is_checked(self):
        cfg = odesim.default_config(
            "burgers_dirichlet", grid=24, time_points=20,
            train_params=[(3.0, 3.5)], test_params=[4.0],
        )
        with pytest.raises(ConfigError):
            odesim.generate_benchmark(cfg)
        cfg = odesim.default_config(
            "lorenz", time_points=20, train_params=[(1.0, 2.0)],
        )
        with pytest.raises(ConfigError):
            odesim.generate_benchmark(cfg)


class TestLifting:
    def test_equilibrium_maps_to_origin(self):
        V = np.ones((5, 3))
        assert_allclose(odesim.lift_chafee(V), np.zeros((10, 3)))

    def test_hand_example(self):
        V = np.array([[3.0]])
        lifted = odesim.lift_chafee(V, alpha=0.5)
        assert_allclose(lifted, [[2.0], [2.0]])

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        V = rng.standard_normal((7, 4))
        assert np.abs(odesim.unlift_chafee(odesim.lift_chafee(V)) - V).max() < 1e-14

    def test_shape_validation(self):
        with pytest.raises(ShapeMismatch):
            odesim.lift_chafee(np.ones(4))
        with pytest.raises(ShapeMismatch):
            odesim.unlift_chafee(np.ones((5, 2)))
