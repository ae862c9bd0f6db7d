import numpy as np
import pytest

from vocontact.mechanics import (Material, NonPositiveJacobian, body_force_stiffness, cauchy_stress,
                                 element_internal_force, kirchhoff_stress, spatial_tangent,
                                 strain_energy_density)
from vocontact.mesh import build_elements, integration_groups
from vocontact.nurbs import KnotVector, NurbsPatch
from vocontact.refine import build_vo_patch, parse_plan

MAT = Material(10.0, 0.3)


def voigt(s):
    return np.array([s[0, 0], s[1, 1], s[0, 1]])


class TestStress:
    def test_reference_state(self):
        np.testing.assert_allclose(cauchy_stress(MAT, np.eye(2)), 0.0, atol=1e-15)

    def test_equibiaxial(self):
        a = 1.1
        s = cauchy_stress(MAT, np.diag([a, a]))
        expect = (MAT.lam * 2 * np.log(a)) / a ** 2 + MAT.mu / a ** 2 * (a ** 2 - 1)
        np.testing.assert_allclose(s, expect * np.eye(2), rtol=1e-14)

    def test_simple_shear_small_strain(self):
        g = 1e-4
        s = cauchy_stress(MAT, np.array([[1, g], [0, 1.0]]))
        assert s[0, 1] == pytest.approx(MAT.mu * g, rel=1e-10)

    def test_inverted(self):
        with pytest.raises(NonPositiveJacobian):
            kirchhoff_stress(MAT, np.diag([1.0, -1.0]))

    def test_stress_from_energy(self):
        # P = dW/dF, tau = P F^T
        F = np.array([[1.2, 0.1], [-0.05, 0.9]])
        h = 1e-6
        P = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                d = np.zeros((2, 2))
                d[i, j] = h
                P[i, j] = (strain_energy_density(MAT, F + d) - strain_energy_density(MAT, F - d)) / (2 * h)
        np.testing.assert_allclose(kirchhoff_stress(MAT, F), P @ F.T, rtol=1e-7)


class TestTangent:
    def test_small_strain_limit(self):
        c = spatial_tangent(MAT, np.eye(2))
        lam, mu = MAT.lam, MAT.mu
        np.testing.assert_allclose(c, [[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])

    def test_no_lambda_terms(self):
        m = Material(3.0, 0.0)
        assert m.lam == 0.0
        c = spatial_tangent(m, np.diag([1.3, 0.8]))
        assert c[0, 1] == 0.0

    def test_directional_derivative(self):
        # Lie derivative: d(tau)[dF] = c : sym(dF F^-1) J + l tau + tau l^T
        rng = np.random.default_rng(0)
        F = np.eye(2) + 0.2 * rng.standard_normal((2, 2))
        assert np.linalg.det(F) > 0
        dF = rng.standard_normal((2, 2))
        h = 1e-6
        dtau = (kirchhoff_stress(MAT, F + h * dF) - kirchhoff_stress(MAT, F - h * dF)) / (2 * h)
        l = dF @ np.linalg.inv(F)
        tau = kirchhoff_stress(MAT, F)
        J = np.linalg.det(F)
        d = 0.5 * (l + l.T)
        c = spatial_tangent(MAT, F) * J
        pred = c @ np.array([d[0, 0], d[1, 1], 2 * d[0, 1]])
        pred = pred + voigt(l @ tau + tau @ l.T)
        np.testing.assert_allclose(voigt(dtau), pred, rtol=1e-6)


def element_data(plan="N2", parts=(2, 2)):
    k = KnotVector([0, 0, 1, 1], 1)
    P = np.array([[[0, 0], [0.2, 1]], [[1.3, 0.1], [1, 1.2]]])
    vp = build_vo_patch(NurbsPatch(k, k, P, np.ones((2, 2))), parse_plan(plan, subdivisions=parts))
    els, _ = build_elements(vp)
    return integration_groups(vp, els)


class TestElement:
    @pytest.mark.parametrize("plan", ["N2", "N2-N2.2"])
    def test_zero_displacement(self, plan):
        g = element_data(plan)[0]
        f, _ = element_internal_force(MAT, g.dNdX[0], g.wdV[0], np.zeros((g.conn.shape[1], 2)))
        np.testing.assert_array_equal(f, 0.0)

    def test_rigid_translation(self):
        g = element_data()[0]
        u = np.tile([0.3, -0.7], (g.conn.shape[1], 1))
        f, _ = element_internal_force(MAT, g.dNdX[0], g.wdV[0], u)
        assert np.abs(f).max() < 1e-10 * MAT.E

    def test_rigid_rotation(self):
        # finite rotation is stress free
        k = KnotVector([0, 0, 1, 1], 1)
        P = np.array([[[0, 0], [0, 1]], [[1, 0], [1, 1.0]]])
        vp = build_vo_patch(NurbsPatch(k, k, P, np.ones((2, 2))), parse_plan("N2"))
        els, _ = build_elements(vp)
        g = integration_groups(vp, els)[0]
        X = vp.control_points()[g.conn[0]]
        t = 0.7
        Q = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        f, _ = element_internal_force(MAT, g.dNdX[0], g.wdV[0], X @ Q.T - X)
        assert np.abs(f).max() < 1e-12 * MAT.E

    @pytest.mark.parametrize("plan", ["N2", "N3", "N2-N4", "N2-N2.2"])
    def test_stiffness_fd(self, plan):
        rng = np.random.default_rng(4)
        for g in element_data(plan):
            ne = g.conn.shape[1]
            u = 0.05 * rng.standard_normal((ne, 2))
            _, K = element_internal_force(MAT, g.dNdX[0], g.wdV[0], u)
            h = 1e-7
            Kfd = np.zeros_like(K)
            for k in range(2 * ne):
                d = np.zeros(2 * ne)
                d[k] = h
                fp, _ = element_internal_force(MAT, g.dNdX[0], g.wdV[0], u + d.reshape(-1, 2), False)
                fm, _ = element_internal_force(MAT, g.dNdX[0], g.wdV[0], u - d.reshape(-1, 2), False)
                Kfd[:, k] = (fp - fm) / (2 * h)
            assert np.linalg.norm(K - Kfd) / np.linalg.norm(Kfd) < 1e-5
            np.testing.assert_allclose(K, K.T, atol=1e-10 * np.abs(K).max())

    def test_batched_matches_single(self):
        g = element_data()[0]
        rng = np.random.default_rng(5)
        u = 0.02 * rng.standard_normal((len(g.conn), g.conn.shape[1], 2))
        f, K = body_force_stiffness(MAT, g.dNdX, g.wdV, u)
        f1, K1 = element_internal_force(MAT, g.dNdX[1], g.wdV[1], u[1])
        np.testing.assert_allclose(f[1].ravel(), f1)
        np.testing.assert_allclose(K[1].reshape(K1.shape), K1)

    def test_material_validation(self):
        with pytest.raises(ValueError):
            Material(-1.0)
        with pytest.raises(ValueError):
            Material(1.0, 0.5)
