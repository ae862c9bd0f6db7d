import numpy as np
import pytest
import scipy.sparse as sp

from conftest import block, block_on_line, two_blocks
from vocontact.contact import ContactPair, ContactSurface, outward_sign
from vocontact.mechanics import Material
from vocontact.problems import generate_ironing
from vocontact.solver import (Body, ConvergenceError, DirichletBC, Model, SolveSettings,
                              linear_solve, newton, solve)


class TestLinearSolve:
    def test_identity(self):
        b = np.arange(5.0)
        np.testing.assert_array_equal(linear_solve(sp.eye(5), b), b)

    def test_spd(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((50, 50))
        A = M @ M.T + 50 * np.eye(50)
        b = rng.standard_normal(50)
        x = linear_solve(A, b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-10

    def test_singular(self):
        with pytest.raises(ConvergenceError):
            linear_solve(np.zeros((3, 3)), np.ones(3))


class TestDirichlet:
    def test_interpolation(self):
        bc = DirichletBC(0, np.array([0]), 1, np.array([1.0, 3.0]))
        assert bc.value(0) == 0.0
        assert bc.value(1.5) == pytest.approx(2.0)
        assert bc.value(2) == 3.0


class TestAssembly:
    def test_no_loading(self):
        m = two_blocks()
        r, K, f_int, f_c, _ = m.assemble(np.zeros(m.n_dof))
        np.testing.assert_allclose(r, 0.0, atol=1e-12)  # touching faces: round-off gaps only
        np.testing.assert_allclose((K - K.T).toarray(), 0.0, atol=1e-10)

    def test_separated_bodies_uncoupled(self):
        m = two_blocks()
        u = np.zeros(m.n_dof)
        u[1::2] = 0.0
        n0 = 2 * m.bodies[0].patch.n_cp
        u[1:n0:2] = 0.05  # lift the upper block
        _, K, _, _, _ = m.assemble(u)
        assert abs(K[:n0, n0:]).max() == 0.0

    @pytest.mark.parametrize("mu", [0.0, 0.3])
    def test_tangent_fd(self, mu):
        m = two_blocks(mu=mu, eps=100.0)
        rng = np.random.default_rng(1)
        u = 1e-3 * rng.standard_normal(m.n_dof)
        n0 = 2 * m.bodies[0].patch.n_cp
        u[1:n0:2] -= 0.01  # press into the lower block
        if mu:
            r = m.assemble(u, False)[4][0]
            m.pairs[0].xi_sl = np.where(r.points.active, r.points.xi_bar + 0.01, np.nan)
        _, K, _, _, res = m.assemble(u)
        assert res[0].points.active.any()
        h = 1e-7
        K = K.toarray()
        Kfd = np.zeros_like(K)
        for k in range(m.n_dof):
            d = np.zeros(m.n_dof)
            d[k] = h
            Kfd[:, k] = (m.assemble(u + d, False)[0] - m.assemble(u - d, False)[0]) / (2 * h)
        assert np.linalg.norm(K - Kfd) / np.linalg.norm(Kfd) < 1e-4


class TestNewton:
    def test_zero_increment(self):
        m = two_blocks(n_steps=1)
        res = solve(m)
        u1, _, _, it = newton(m, res.u, 1.0, 1.0, SolveSettings())
        assert it == 1
        np.testing.assert_allclose(u1, res.u, atol=1e-14)

    def test_superlinear(self):
        m = block_on_line(n_down=2, n_slide=0, mu=0.0)
        m.n_steps = 2
        trace = []
        u, _, _, _ = newton(m, np.zeros(m.n_dof), 0.0, 1.0, SolveSettings(), trace)
        assert len(trace) >= 3
        e = np.array(trace)
        # r_{k+1} / r_k shrinks: faster than linear over the last two iterations
        assert e[-1] / e[-2] < e[-2] / e[-3]

    def test_cutback_failure_restores_history(self):
        m = block_on_line()
        res = solve(m, SolveSettings(newton_max_iter=1))
        assert not res.completed
        assert res.failed_step == 1
        assert "cutbacks" in res.message
        assert np.all(np.isnan(m.pairs[0].xi_sl))


class TestSolve:
    def test_reaction_balance(self):
        res = solve(two_blocks())
        f = res.records[-1].forces
        tot = abs(f["top"][1])
        assert abs(f["top"][1] + f["bottom"][1]) <= 1e-10 * tot
        assert abs(f["top"][0] + f["bottom"][0]) <= 1e-10 * tot

    def test_deterministic(self):
        a = solve(block_on_line())
        b = solve(block_on_line())
        np.testing.assert_array_equal(a.u, b.u)
        assert [r.forces for r in a.records] == [r.forces for r in b.records]

    def test_body_ordering_invariance(self):
        ref = two_blocks()
        res = solve(ref)
        up, lo = [b.patch for b in ref.bodies]
        top, bot = up.edge_indices("eta1"), lo.edge_indices("eta1")
        bcs = []
        for bc in ref.bcs:
            bcs.append(DirichletBC(1 - bc.body, bc.cps, bc.comp, bc.history))
        pair = ContactPair(ContactSurface(up.layer, 1, outward_sign(up)),
                           ContactSurface(lo.layer, 0, outward_sign(lo)), 1e4)
        swapped = Model([Body(lo, Material(10.0, 0.3)), Body(up, Material(10.0, 0.3))], bcs,
                        [pair], ref.n_steps, {"top": (1, top)})
        res2 = solve(swapped)
        n_lo = 2 * lo.n_cp
        u2 = np.concatenate([res2.u[n_lo:], res2.u[:n_lo]])
        np.testing.assert_allclose(u2, res.u, atol=1e-10)

    def test_ironing_compression_monotone(self):
        prob = generate_ironing("m1", "N2")
        res = solve(prob.model, SolveSettings(steps=46))
        assert res.completed and len(res.records) == 46
        py = np.array([r.forces["die_top"][1] for r in res.records])
        assert np.all(np.diff(py) > 0)
