import numpy as np
import pytest

from vocontact.contact import PointData
from vocontact.metrics import (PressureProfile, compute_metrics, delta_p, l2_error,
                               oscillation_amplitude, time_percentage)


def history(px, py):
    return np.column_stack([np.arange(1, len(px) + 1), px, py])


def profile(x, p):
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    return PressureProfile(x, p, 0.1 * p, np.zeros(len(x), bool))


class TestAmplitude:
    def test_constant(self):
        assert delta_p(history(np.full(10, 2.0), np.full(10, -1.0))) == (0.0, 0.0)

    def test_window(self):
        px = np.array([0, 10, 1, 2, 1.5, 1], float)
        h = history(px, -px)
        assert delta_p(h, (3, 6)) == (1.0, 1.0)
        assert delta_p(h) == (10.0, 10.0)

    def test_empty(self):
        assert oscillation_amplitude([]) == 0.0


class TestL2:
    def test_self(self):
        x = np.linspace(0, 1, 30)
        assert l2_error(x, 1 - x ** 2, x, 1 - x ** 2) == 0.0

    def test_constant_offset(self):
        x = np.linspace(0, 2, 201)
        assert l2_error(x, np.full_like(x, 1.5), x, np.ones_like(x)) == pytest.approx(
            np.sqrt(0.25 * 2), rel=1e-12)

    def test_reference_zero_outside(self):
        x = np.linspace(0, 2, 201)
        e = l2_error(x, np.ones_like(x), [0, 1], [1, 1])
        assert e == pytest.approx(1.0, rel=1e-2)

    def test_unsorted_input(self):
        x = np.linspace(0, 1, 11)
        o = np.random.default_rng(0).permutation(11)
        assert l2_error(x[o], x[o] ** 2, x, x) == pytest.approx(l2_error(x, x ** 2, x, x))


class TestProfile:
    def test_from_points_and_extent(self):
        n = 5
        pts = PointData(x=np.column_stack([[0.3, -0.1, 0.2, -0.4, 0.0], np.zeros(n)]),
                        X_ref=np.zeros((n, 2)), gN=np.array([-1, -1, -1, 1, -1.0]),
                        tN=np.array([1, 3, 2, 0, 4.0]), tT=np.zeros((n, 2)),
                        active=np.array([1, 1, 1, 0, 1], bool), slip=np.zeros(n, bool),
                        xi_bar=np.zeros(n), weight=np.ones(n))
        p = PressureProfile.from_points(pts)
        np.testing.assert_allclose(p.x, [0.0, 0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(p.p_n, [4, 3, 2, 1, 0])
        assert p.contact_extent() == pytest.approx(0.3)

    def test_normalized_self_error(self):
        ref = profile(np.linspace(0, 0.1, 20), np.sqrt(1 - (np.linspace(0, 0.1, 20) / 0.1) ** 2))
        m = compute_metrics(profile=ref, reference=ref)
        assert m.l2_pressure_error == 0.0
        assert m.extra["a_ref"] == pytest.approx(ref.x[ref.p_n > 0].max())

    def test_missing_reference(self, caplog):
        m = compute_metrics(profile=profile([0, 1], [1, 0]))
        assert m.l2_pressure_error is None
        assert "reference" in caplog.text


class TestTime:
    def test_percentage(self):
        assert time_percentage(5.0, 10.0) == 50.0
        assert time_percentage(10.0, 10.0) == 100.0
        with pytest.raises(ValueError):
            time_percentage(1.0, 0.0)


def test_reference_held_at_origin():
    # run samples closer to the symmetry line than the first reference sample
    e = l2_error([0.0, 0.5, 1.0], [1.0, 1.0, 1.0], [0.2, 1.0], [1.0, 1.0])
    assert e == 0.0
