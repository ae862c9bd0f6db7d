import numpy as np
import pytest

from vocontact.problems import (CUSTOM, HERTZ, IRONING, IRONING_LARGE, RINGS, ProblemConfig, generate,
                                generate_hertz, generate_ironing, generate_two_rings,
                                geometric_breaks, graded_breaks, hertz_patch, ironing_patches,
                                quarter_arc_parameter, rings_patches)
from vocontact.refine import ConfigurationError
from vocontact.solver import SolveSettings, solve

T = np.linspace(0.0, 1.0, 201)


def edge_radii(vp, center=(0.0, 0.0)):
    """Distances to ``center`` along the contact layer and the opposite bulk edge."""
    c = np.asarray(center)
    inner = vp.bulk.evaluate(T, np.ones_like(T))
    return (np.linalg.norm(vp.layer.evaluate(T)[:, 0] - c, axis=1),
            np.linalg.norm(inner - c, axis=1))


class TestGeometry:
    @pytest.mark.parametrize("plan", ["L1", "N2", "N2-N2.1", "N2-N2.2", "N2-N4", "N4"])
    def test_hertz_radii(self, plan):
        vp = hertz_patch(2, plan)
        outer, inner = edge_radii(vp)
        if plan == "L1":
            # bilinear: nodes on the arcs, chords inside
            assert np.all(outer <= HERTZ["r_out"] + 1e-12)
            return
        np.testing.assert_allclose(outer, HERTZ["r_out"], atol=1e-12)
        np.testing.assert_allclose(inner, HERTZ["r_in"], atol=1e-12)

    @pytest.mark.parametrize("plan", ["N2", "N2-N2.1", "N2-N4", "N4"])
    def test_ring_radii(self, plan):
        for vp, name in zip(rings_patches(1, {"upper": plan, "lower": plan}), ("upper", "lower")):
            c, ro, ri = RINGS[name]
            outer, inner = edge_radii(vp, c)
            np.testing.assert_allclose(outer, ro, atol=1e-12)
            np.testing.assert_allclose(inner, ri, atol=1e-12)

    def test_die_arc(self):
        die, slab = ironing_patches(1, {"die": "N2-N2.2", "slab": "N2"})
        outer, inner = edge_radii(die, IRONING["die_center"])
        np.testing.assert_allclose(outer, IRONING["die_r_out"], atol=1e-12)
        np.testing.assert_allclose(inner, IRONING["die_r_in"], atol=1e-12)
        # the die touches the slab top at its lowest point
        x = die.layer.evaluate(T)[:, 0]
        assert x[:, 1].min() == pytest.approx(IRONING["slab"][3], abs=1e-12)
        np.testing.assert_allclose(slab.layer.evaluate(T)[:, 0, 1], IRONING["slab"][3], atol=1e-14)

    def test_quarter_arc_parameter(self):
        f = np.array([0.0, 0.1, 0.37, 1.0])
        t = quarter_arc_parameter(f)
        w = (1 - t) ** 2 + np.sqrt(2) * t * (1 - t) + t ** 2
        y = (np.sqrt(0.5) * 2 * t * (1 - t) + t ** 2) / w
        x = ((1 - t) ** 2 + np.sqrt(0.5) * 2 * t * (1 - t)) / w
        np.testing.assert_allclose(np.arctan2(y, x) / (np.pi / 2), f, atol=1e-13)


class TestGrading:
    @pytest.mark.parametrize("n", [9, 18, 48, 288])
    def test_bands(self, n):
        b = graded_breaks(n)
        assert len(b) == n + 1 and b[0] == 0.0 and b[-1] == 1.0
        assert np.all(np.diff(b) > 0)
        assert np.sum(b[1:] <= 0.1 + 1e-14) == round(0.8 * n)

    @pytest.mark.parametrize("n", [9, 36, 48])
    def test_geometric(self, n):
        b = geometric_breaks(n)
        h = np.diff(b)
        assert len(b) == n + 1 and b[-1] == 1.0
        assert h[0] == pytest.approx(np.diff(graded_breaks(n))[0])
        np.testing.assert_allclose(h[1:-1] / h[:-2], h[1] / h[0], rtol=1e-9)

    def test_hertz_grading_option(self):
        a = generate_hertz("m1", "N2").model.bodies[0].patch
        b = generate_hertz("m1", "N2", grading="geometric").model.bodies[0].patch
        assert a.dof_counts() == b.dof_counts()
        assert not np.allclose(a.control_points(), b.control_points())


class TestSetups:
    def test_ironing_schedule(self):
        prob = generate_ironing("m1", "N2")
        m = prob.model
        assert m.n_steps == IRONING["n_down"] + IRONING["n_slide"] == 296
        assert prob.window == (57, 296)
        bc_x, bc_y = m.bcs[0], m.bcs[1]
        assert bc_y.value(46) == pytest.approx(IRONING["U_y"])
        assert bc_x.value(46) == 0.0 and bc_x.value(296) == pytest.approx(IRONING["U_x"])
        assert bc_y.value(296) == pytest.approx(IRONING["U_y"])
        pair = m.pairs[0]
        assert (pair.eps_N, pair.eps_T, pair.mu) == (100.0, 100.0, 0.2)
        assert prob.surface == "die_top" and prob.total_dof == 134

    def test_large_indentation(self):
        prob = generate(ProblemConfig(problem="ironing-large", plan="N2-N4"))
        m = prob.model
        assert m.bodies[0].material.E == IRONING_LARGE["E_die"] == 1e4
        assert m.bcs[1].value(46) == pytest.approx(-0.5)
        assert m.pairs[0].mu == 0.1

    def test_hertz_setup(self):
        prob = generate_hertz("m3", "N2-N2.2")
        m = prob.model
        assert m.n_steps == HERTZ["n_steps"]
        assert m.bcs[0].value(m.n_steps) == pytest.approx(-HERTZ["v_bar"])
        assert m.pairs[0].eps_N == 2000.0 and m.pairs[0].mu == 0.0
        assert prob.normalize_pressure

    def test_rings_setup(self):
        prob = generate_two_rings("m2", "N2-N2.1")
        m = prob.model
        assert m.n_steps == 40 and m.bcs[0].value(40) == pytest.approx(-4.0)
        pair = m.pairs[0]
        assert (pair.eps_N, pair.eps_T, pair.mu) == (100.0, 10.0, 0.1)
        assert [b.material.E for b in m.bodies] == [100.0, 300.0]
        assert not prob.normalize_pressure
        # the slave layer is the bottom of the upper ring
        x = pair.slave.curve.evaluate(T)[:, 0]
        assert x[:, 1].min() == pytest.approx(12.0)

    def test_config_overrides(self):
        prob = generate(ProblemConfig(problem="hertz", mesh="m1", eps_n=10.0, load_steps=4,
                                      v_bar=0.001))
        assert prob.model.pairs[0].eps_N == 10.0 and prob.model.n_steps == 4
        assert prob.model.bcs[0].value(4) == pytest.approx(-0.001)

    def test_plan_for_unknown_body(self):
        with pytest.raises(ConfigurationError):
            generate(ProblemConfig(problem="hertz", plan={"die": "N2"}))


class TestCustom:
    def test_defaults(self):
        prob = generate(ProblemConfig(problem="custom", plan="N2"))
        up, lo = prob.patches["upper"], prob.patches["lower"]
        np.testing.assert_allclose(up.layer.evaluate(T)[:, 0, 1], CUSTOM["upper"][2], atol=1e-14)
        np.testing.assert_allclose(lo.layer.evaluate(T)[:, 0, 1], CUSTOM["lower"][3], atol=1e-14)
        assert prob.model.n_steps == CUSTOM["n_steps"]

    def test_mesh_level_doubles_elements(self):
        a = generate(ProblemConfig(problem="custom", mesh="m1")).patches["upper"]
        b = generate(ProblemConfig(problem="custom", mesh="m2")).patches["upper"]
        assert tuple(2 * n for n in a.n_elements) == tuple(b.n_elements)

    def test_sliding_friction_force(self):
        # a long drag slides the whole interface: |P_x| close to, and bounded by, mu P_y
        # (corner points may still stick and deformed normals tilt slightly)
        c = ProblemConfig(problem="custom", plan="N2", mu=0.2,
                          custom={"u_x": 0.2, "u_y": -0.05, "n_steps": 12})
        prob = generate(c)
        res = solve(prob.model, SolveSettings())
        assert res.completed
        px, py = res.records[-1].forces[prob.surface]
        assert py > 0
        assert px < 0 and abs(px) <= 0.2 * py * (1 + 1e-9)
        assert px == pytest.approx(-0.2 * py, rel=1e-2)

    def test_frictionless_compression(self):
        c = ProblemConfig(problem="custom", plan="N2-N4", custom={"u_y": -0.02, "n_steps": 4})
        prob = generate(c)
        res = solve(prob.model, SolveSettings())
        px, py = res.records[-1].forces[prob.surface]
        assert py > 0 and abs(px) < 1e-10 * py

    @pytest.mark.parametrize("custom", [{"height": 1.0}, {"upper": [0, 1, 0]}, {"mu": "x"},
                                        {"upper": [1, 0, 0, 1]}, {"upper": [0, 1, -0.5, 0.5]},
                                        {"n_steps": 0}, {"nu": 0.5}])
    def test_invalid(self, custom):
        with pytest.raises(ConfigurationError):
            ProblemConfig(problem="custom", custom=custom)

    def test_custom_table_needs_custom_problem(self):
        with pytest.raises(ConfigurationError, match="custom"):
            ProblemConfig(problem="hertz", custom={"mu": 0.1})
