"""Unit tests for the stable model parameterizations and certificates."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from stablequad import odesim, quadtensor, stableparam
from stablequad.exceptions import ConfigError, NonSPD, NotStrictlyStable
from stablequad.quadtensor import QuadModel

# 2-D model that is globally stable only under a non-identity weight.
A_WEIGHTED = np.array([[-4.0, -4.0], [1.0, 0.0]])
H_WEIGHTED = np.array([[2.0, 5.0, 4.0, 10.0], [-1.0, -2.0, -2.0, -4.0]])
Q_WEIGHTED = np.array([[1.0, 2.0], [2.0, 5.0]])


def conditioned(rng, n, lo=0.5, hi=2.0):
    """Random matrix with singular values in [lo, hi].

    Certificates test strict negativity relative to the matrix scale, so
    fuzz draws keep factors away from singularity (a nearly singular
    factor makes the assembled Gram matrix defensibly *semi*-definite).
    """
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = rng.uniform(lo, hi, size=n)
    return U @ np.diag(s) @ V.T


def random_las(rng, n, scale=1.0):
    return stableparam.LasParams(
        J_raw=scale * rng.standard_normal((n, n)),
        R_fac=scale * rng.standard_normal((n, n)),
        Q_fac=scale * rng.standard_normal((n, n)),
        H_free=scale * rng.standard_normal((n, n * n)),
    )


def random_gas(rng, n, scale=1.0):
    return stableparam.GasParams(
        J_raw=scale * rng.standard_normal((n, n)),
        R_fac=scale * rng.standard_normal((n, n)),
        Q_fac=scale * rng.standard_normal((n, n)),
        H_ten=scale * rng.standard_normal((n, n, n)),
    )


def random_atr(rng, n, scale=1.0):
    return stableparam.AtrParams(
        J_raw=scale * rng.standard_normal((n, n)),
        R_fac=scale * rng.standard_normal((n, n)),
        Q_fac=scale * rng.standard_normal((n, n)),
        H_ten=scale * rng.standard_normal((n, n, n)),
        m=scale * rng.standard_normal(n),
        B_tilde=scale * rng.standard_normal(n),
    )


class TestAssembleLas:
    def test_identity_factors(self):
        p = stableparam.LasParams(
            J_raw=np.zeros((3, 3)),
            R_fac=np.eye(3),
            Q_fac=np.eye(3),
            H_free=np.zeros((3, 9)),
        )
        model = stableparam.assemble_las(p)
        assert_allclose(model.A, -np.eye(3))
        assert_allclose(np.linalg.eigvals(model.A).real, [-1.0, -1.0, -1.0])
        assert_allclose(model.B, np.zeros(3))

    def test_hand_worked_two_by_two(self):
        p = stableparam.LasParams(
            J_raw=np.array([[0.0, 1.0], [0.0, 0.0]]),
            R_fac=np.diag([1.0, 2.0]),
            Q_fac=np.eye(2),
            H_free=np.zeros((2, 4)),
        )
        model = stableparam.assemble_las(p)
        assert_allclose(model.A, [[-1.0, 1.0], [-1.0, -4.0]])
        eigs = np.linalg.eigvals(model.A)
        assert_allclose(eigs.sum().real, -5.0)  # trace
        assert_allclose(np.prod(eigs).real, 5.0)  # determinant
        assert np.all(eigs.real < 0)

    def test_random_factors_always_stable(self):
        rng = np.random.default_rng(0)
        count = 0
        for _ in range(100):
            p = random_las(rng, 6)
            if (
                np.linalg.svd(p.R_fac, compute_uv=False).min() > 1e-6
                and np.linalg.svd(p.Q_fac, compute_uv=False).min() > 1e-6
            ):
                count += 1
                model = stableparam.assemble_las(p)
                assert np.linalg.eigvals(model.A).real.max() < 0
        assert count > 50  # singular draws are measure-zero

    def test_hessian_passes_through(self):
        rng = np.random.default_rng(1)
        p = random_las(rng, 3)
        model = stableparam.assemble_las(p)
        assert_allclose(model.H, p.H_free)


class TestAssembleGas:
    def test_zero_tensor_gives_zero_hessian(self):
        p = stableparam.GasParams(
            J_raw=np.zeros((3, 3)),
            R_fac=np.eye(3),
            Q_fac=np.eye(3),
            H_ten=np.zeros((3, 3, 3)),
        )
        model = stableparam.assemble_gas(p)
        assert_allclose(model.H, np.zeros((3, 9)))

    def test_weighted_energy_preservation(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = random_gas(rng, 4)
            model = stableparam.assemble_gas(p)
            Q = p.Q_fac @ p.Q_fac.T
            assert quadtensor.gen_energy_preserving_residual(model.H, Q) < 1e-10

    def test_identity_weight_gives_plain_preservation(self):
        rng = np.random.default_rng(3)
        p = random_gas(rng, 3)
        p.Q_fac = np.eye(3)
        model = stableparam.assemble_gas(p)
        for _ in range(100):
            x = rng.standard_normal(3)
            assert abs(x @ model.rhs(x) - x @ (model.A @ x)) < 1e-12


class TestAssembleAtr:
    def test_zero_shift_matches_gas_plus_forcing(self):
        rng = np.random.default_rng(4)
        p = random_atr(rng, 3)
        p.m = np.zeros(3)
        model = stableparam.assemble_atr(p)
        gas = stableparam.assemble_gas(
            stableparam.GasParams(p.J_raw, p.R_fac, p.Q_fac, p.H_ten)
        )
        assert_allclose(model.A, gas.A)
        assert_allclose(model.H, gas.H)
        assert_allclose(model.B, p.B_tilde)

    def test_simulation_equivalence_with_shifted_model(self):
        rng = np.random.default_rng(5)
        p = random_atr(rng, 3, scale=0.3)
        model = stableparam.assemble_atr(p)
        A_t, _ = stableparam._stable_linear(p.J_raw, p.R_fac, p.Q_fac)
        shifted = QuadModel(A_t, model.H, np.asarray(p.B_tilde, dtype=float))
        x0 = rng.standard_normal(3)
        full = odesim.simulate(model, x0, 100, 0.01)
        tilde = odesim.simulate(shifted, x0 - p.m, 100, 0.01)
        assert not full.diverged and not tilde.diverged
        assert np.abs(full.states - (tilde.states + p.m)).max() < 1e-10

    def test_recovered_shifted_linear_part_is_stable(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p = random_atr(rng, 3)
            p.R_fac = p.R_fac + 3.0 * np.eye(3)  # keep R comfortably full rank
            model = stableparam.assemble_atr(p)
            Q = p.Q_fac @ p.Q_fac.T
            A_t = (
                model.A
                + quadtensor.kron_contract_right(model.H, p.m)
                + quadtensor.kron_contract_left(model.H, p.m)
            )
            S = 0.5 * (Q @ A_t + A_t.T @ Q)
            assert np.linalg.eigvalsh(S).max() < 0


class TestLocalRadius:
    def test_unit_factors(self):
        H = np.zeros((2, 4))
        H[0, 0] = 2.0  # spectral norm 2
        r = stableparam.local_radius(np.zeros((2, 2)), np.eye(2), np.eye(2), H)
        assert_allclose(r, 0.5)

    def test_zero_hessian_is_unbounded(self):
        r = stableparam.local_radius(
            np.zeros((2, 2)), np.eye(2), np.eye(2), np.zeros((2, 4))
        )
        assert r == math.inf

    def test_anisotropic_dissipation(self):
        H = np.zeros((2, 4))
        H[0, 1] = 1.0  # spectral norm 1
        r = stableparam.local_radius(
            np.zeros((2, 2)), np.diag([1.0, 4.0]), np.eye(2), H
        )
        assert_allclose(r, 1.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(NonSPD):
            stableparam.local_radius(
                np.zeros((2, 2)), -np.eye(2), np.eye(2), np.zeros((2, 4))
            )
        with pytest.raises(ConfigError):
            stableparam.local_radius(
                np.array([[0.0, 1.0], [1.0, 0.0]]),
                np.eye(2),
                np.eye(2),
                np.zeros((2, 4)),
            )

    def test_radius_is_conservative(self):
        # The Lyapunov derivative must be negative strictly inside the
        # guaranteed ball.
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(100):
            p = random_las(rng, 3)
            if (
                np.linalg.svd(p.R_fac, compute_uv=False).min() < 1e-3
                or np.linalg.svd(p.Q_fac, compute_uv=False).min() < 1e-3
            ):
                continue
            checked += 1
            J = p.J_raw - np.asarray(p.J_raw).T
            R = p.R_fac @ p.R_fac.T
            Q = p.Q_fac @ p.Q_fac.T
            model = stableparam.assemble_las(p)
            r = stableparam.local_radius(J, R, Q, model.H)
            for _ in range(10):
                x = rng.standard_normal(3)
                x *= 0.9 * r / np.linalg.norm(x)
                assert x @ (Q @ model.rhs(x)) < 0
        assert checked > 50


class TestTrappingRadius:
    def test_zero_forcing_gives_zero_radius(self):
        p = stableparam.AtrParams(
            J_raw=np.zeros((2, 2)),
            R_fac=np.eye(2),
            Q_fac=np.eye(2),
            H_ten=np.zeros((2, 2, 2)),
            m=np.zeros(2),
            B_tilde=np.zeros(2),
        )
        assert stableparam.trapping_radius(p) == 0.0

    def test_unit_dissipation(self):
        p = stableparam.AtrParams(
            J_raw=np.zeros((2, 2)),
            R_fac=np.eye(2),
            Q_fac=np.eye(2),
            H_ten=np.zeros((2, 2, 2)),
            m=np.zeros(2),
            B_tilde=np.array([3.0, 0.0]),
        )
        assert_allclose(stableparam.trapping_radius(p), 3.0)

    def test_singular_dissipation_rejected(self):
        p = stableparam.AtrParams(
            J_raw=np.zeros((2, 2)),
            R_fac=np.zeros((2, 2)),
            Q_fac=np.eye(2),
            H_ten=np.zeros((2, 2, 2)),
            m=np.zeros(2),
            B_tilde=np.ones(2),
        )
        with pytest.raises(NotStrictlyStable):
            stableparam.trapping_radius(p)

    def test_trajectories_enter_and_stay_in_ball(self):
        rng = np.random.default_rng(8)
        p = random_atr(rng, 3, scale=0.5)
        p.R_fac = p.R_fac + 2.0 * np.eye(3)
        model = stableparam.assemble_atr(p)
        r = stableparam.trapping_radius(p)
        Q = p.Q_fac @ p.Q_fac.T
        # Trapping is stated in the Q-weighted norm; convert to a plain
        # euclidean bound via the spectrum of Q.
        lam = np.linalg.eigvalsh(Q)
        euclid_bound = r * math.sqrt(lam.max() / lam.min())
        for _ in range(3):
            x0 = 10.0 * rng.standard_normal(3)
            res = odesim.simulate(model, x0, 4000, 0.01)
            assert not res.diverged
            tail = res.states[-200:] - p.m
            assert np.linalg.norm(tail, axis=1).max() < euclid_bound * (1 + 1e-6)


class TestCertify:
    def test_weighted_global_certificate(self):
        model = QuadModel(A_WEIGHTED, H_WEIGHTED)
        cert = stableparam.certify(model, "global", Q=Q_WEIGHTED)
        assert cert.valid
        assert cert.kind == "global"
        # (QA)_s for this model is [[-2, -3.5], [-3.5, -8]].
        assert_allclose(sorted(cert.eig_evidence), sorted(
            np.linalg.eigvalsh(np.array([[-2.0, -3.5], [-3.5, -8.0]]))
        ))
        assert cert.residuals["energy_residual"] < 1e-10
        assert cert.radius == math.inf

    def test_same_model_fails_unweighted(self):
        model = QuadModel(A_WEIGHTED, H_WEIGHTED)
        cert = stableparam.certify(model, "global")
        assert not cert.valid

    def test_rotation_is_not_locally_stable(self):
        model = QuadModel(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros((2, 4)))
        cert = stableparam.certify(model, "local")
        assert not cert.valid
        assert_allclose(np.abs(cert.eig_evidence.imag), [1.0, 1.0])

    def test_linear_local_certificate_with_radius(self):
        model = QuadModel(-np.eye(2), np.zeros((2, 4)))
        cert = stableparam.certify(model, "local")
        assert cert.valid
        assert cert.radius == math.inf

    def test_inviscid_mhd_conserves_energy(self):
        model = odesim.mhd_truth(nu=0.0, mu=0.0)
        assert_allclose(model.A, np.zeros((6, 6)))
        cert = stableparam.certify(model, "energy_conserving")
        assert cert.valid
        assert cert.residuals["energy_residual"] < 1e-12

    def test_viscous_mhd_is_not_conserving(self):
        model = odesim.mhd_truth(nu=0.1, mu=0.1)
        cert = stableparam.certify(model, "energy_conserving")
        assert not cert.valid

    def test_trapping_certificate_attaches_radius(self):
        rng = np.random.default_rng(9)
        p = random_atr(rng, 3, scale=0.5)
        p.R_fac = p.R_fac + 2.0 * np.eye(3)
        model = stableparam.assemble_atr(p)
        Q = p.Q_fac @ p.Q_fac.T
        cert = stableparam.certify(model, "trapping", Q=Q, m=p.m)
        assert cert.valid
        assert cert.radius is not None and cert.radius >= 0
        assert_allclose(cert.radius, stableparam.trapping_radius(p), rtol=1e-10)

    def test_unknown_kind_rejected(self):
        model = QuadModel(-np.eye(2), np.zeros((2, 4)))
        with pytest.raises(ConfigError):
            stableparam.certify(model, "asymptotic")


class TestFamilySoundness:
    """Small-scale fuzz; the full-scale sweep lives in the acceptance suite."""

    def test_las_members_certify_local(self):
        rng = np.random.default_rng(10)
        for n in (2, 4):
            for _ in range(25):
                p = random_las(rng, n)
                model = stableparam.assemble_las(p)
                if np.linalg.eigvals(model.A).real.max() < -1e-8:
                    cert = stableparam.certify(model, "local")
                    assert cert.valid

    def test_gas_members_certify_global(self):
        rng = np.random.default_rng(11)
        for n in (2, 4):
            for _ in range(25):
                p = random_gas(rng, n)
                p.R_fac = conditioned(rng, n)
                p.Q_fac = conditioned(rng, n)
                model = stableparam.assemble_gas(p)
                Q = p.Q_fac @ p.Q_fac.T
                cert = stableparam.certify(model, "global", Q=Q)
                assert cert.valid

    def test_atr_members_certify_trapping(self):
        rng = np.random.default_rng(12)
        for n in (2, 4):
            for _ in range(25):
                p = random_atr(rng, n)
                p.R_fac = conditioned(rng, n)
                p.Q_fac = conditioned(rng, n)
                model = stableparam.assemble_atr(p)
                Q = p.Q_fac @ p.Q_fac.T
                cert = stableparam.certify(model, "trapping", Q=Q, m=p.m)
                assert cert.valid

    def test_identity_weight_energy_monotone_along_rk4(self):
        rng = np.random.default_rng(13)
        p = random_gas(rng, 3, scale=0.5)
        p.Q_fac = np.eye(3)
        p.R_fac = p.R_fac + 1.0 * np.eye(3)
        model = stableparam.assemble_gas(p)
        res = odesim.simulate(model, rng.standard_normal(3), 500, 0.01)
        norms = np.linalg.norm(res.states, axis=1)
        assert np.all(np.diff(norms) <= 1e-8)

    def test_zero_dissipation_conserves_energy_exactly(self):
        rng = np.random.default_rng(14)
        p = random_gas(rng, 3)
        p.J_raw = np.zeros((3, 3))
        p.R_fac = np.zeros((3, 3))
        p.Q_fac = np.eye(3)
        model = stableparam.assemble_gas(p)
        assert_allclose(model.A, np.zeros((3, 3)))
        x0 = rng.standard_normal(3)
        res = odesim.simulate(model, x0, 1000, 1e-3)
        assert not res.diverged
        e0 = np.sum(x0 ** 2)
        eT = np.sum(res.states[-1] ** 2)
        assert abs(eT - e0) / e0 < 1e-6
