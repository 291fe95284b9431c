import warnings

import numpy as np
import pytest

from psrsqueeze.errors import InvalidParameterError, ModelInvalidError
from psrsqueeze.gaussian_core import (
    GaussianState,
    apply_loss,
    min_max_variance,
    shear,
    vacuum,
    variance_at,
)
from psrsqueeze.medium import (
    LineComponent,
    LineShape,
    MediumModel,
    absorption_peak,
    alpha_at,
    default_model,
    gl_at,
    propagate,
    propagate_values,
    self_rotation_angle,
)


def single(shape="gaussian", rot=1.5, absorb=0.3, center=0.7, width=0.4, **kw):
    return MediumModel((LineComponent(center, width, rot, absorb, shape),), **kw)


def flat(gl, al, **kw):
    """Medium whose gl and al at detuning 1.0 are exactly ``gl`` and ``al``."""
    return MediumModel((LineComponent(0.0, 1.0, gl, 0.0),
                        LineComponent(1.0, 1.0, 0.0, al, "lorentzian")), **kw)


def test_flat_helper():
    m = flat(2.0, 0.1)
    assert gl_at(m, 1.0) == pytest.approx(2.0, abs=1e-15)
    assert alpha_at(m, 1.0) == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("shape", list(LineShape))
def test_single_line_profiles(shape):
    m = single(shape)
    assert gl_at(m, 0.7) == 0.0
    assert gl_at(m, 0.7 + 0.4) == pytest.approx(1.5, abs=1e-14)
    assert gl_at(m, 0.7 - 0.4) == pytest.approx(-1.5, abs=1e-14)
    assert alpha_at(m, 0.7) == pytest.approx(0.3, abs=1e-15)
    assert alpha_at(m, 1e9) == pytest.approx(0.0, abs=1e-12)
    assert alpha_at(m, -1e9) == pytest.approx(0.0, abs=1e-12)


def test_dispersive_extremum_is_at_one_width():
    m = single()
    d = np.linspace(0.7, 5, 200001)
    assert d[np.argmax(gl_at(m, d))] == pytest.approx(1.1, abs=1e-4)


def test_line_shape_widths():
    g = single("gaussian", absorb=1e-3, width=0.5, center=0)
    lo = single("lorentzian", absorb=1e-3, width=0.5, center=0)
    assert alpha_at(g, 0.5) == pytest.approx(1e-3 / np.e)
    assert alpha_at(lo, 0.5) == pytest.approx(0.5e-3)


def test_line_validation():
    with pytest.raises(InvalidParameterError):
        LineComponent(0, 0, 1, 0.1)
    with pytest.raises(InvalidParameterError):
        LineComponent(0, 1, 1, -0.1)
    with pytest.raises(ValueError):
        LineComponent(0, 1, 1, 0.1, "voigt")
    with pytest.raises(InvalidParameterError):
        MediumModel((), slices=0)


def test_absorption_must_stay_below_one():
    m = MediumModel((LineComponent(0, 1, 0, 0.7), LineComponent(0.1, 1, 0, 0.5)))
    with pytest.raises(ModelInvalidError):
        alpha_at(m, np.linspace(-1, 1, 11))
    assert alpha_at(m, 10.0) < 1


def test_default_model():
    m = default_model()
    assert len(m.lines) == 4
    grid = np.linspace(*m.window, 13001)
    a = alpha_at(m, grid)
    d0, amax = absorption_peak(m, grid)
    assert amax < 1
    # zero detuning is the maximum absorption point
    assert abs(d0) < 2 * (grid[1] - grid[0])
    g = gl_at(m, grid)
    assert np.count_nonzero(np.diff(np.sign(g)) != 0) >= 2
    assert np.all((a >= 0) & (a < 1))


def test_default_model_sign_change_across_main_lines():
    m = default_model()
    for line in m.lines[:2]:
        c, w = line.center, line.width
        assert gl_at(m, c - w) < 0 < gl_at(m, c + w)


def test_default_model_side_lobes():
    m = default_model()
    centers = sorted(l.center for l in m.lines)
    assert any(abs(c - 1.0) < 0.3 for c in centers)
    assert any(abs(c - 4.0) < 0.3 for c in centers)


def test_self_rotation_angle():
    m = flat(2.0, 0.0)
    assert self_rotation_angle(m, 1.0, 0.0) == 0.0
    assert self_rotation_angle(m, 1.0, 0.05) == pytest.approx(0.1, abs=1e-15)
    sat = flat(2.0, 0.0, saturation_cubic=10.0)
    assert self_rotation_angle(sat, 1.0, 0.1) == pytest.approx(0.18, abs=1e-14)


def test_rotation_angle_linear_without_saturation():
    m = single()
    eps = np.linspace(-0.1, 0.1, 41)
    phi = self_rotation_angle(m, 1.3, eps)
    assert np.array_equal(phi, gl_at(m, 1.3) * eps)


def test_ellipticity_limits():
    m = single()
    with pytest.raises(InvalidParameterError):
        self_rotation_angle(m, 0.0, 0.31)
    with pytest.warns(UserWarning):
        self_rotation_angle(m, 0.0, 0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        self_rotation_angle(m, 0.0, 0.1)


@pytest.mark.parametrize("n", [1, 2, 7, 50])
def test_lossless_slicing_composes(n):
    s = GaussianState([0.3, -0.4], [[1.5, 0.2], [0.2, 0.9]])
    out = propagate_values(s, 1.3, 0.0, n)
    assert out.allclose(shear(s, 1.3), atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 40])
def test_no_rotation_is_pure_loss(n):
    s = GaussianState([0.3, -0.4], [[1.5, 0.2], [0.2, 0.9]])
    assert propagate_values(s, 0.0, 0.2, n).allclose(apply_loss(s, 0.2), atol=1e-12)


def test_lumped_propagation_matches_closed_form():
    m = flat(1.0, 0.1)
    out = propagate(m, 1.0, vacuum())
    chi = np.linspace(0, np.pi, 100)
    s, c = np.sin(chi), np.cos(chi)
    expect = 0.9 * (1 - 2 * s * c + c * c) + 0.1
    assert np.max(np.abs(variance_at(out, chi) - expect)) < 1e-12


@pytest.mark.parametrize("n", [1, 5, 100])
def test_energy_bookkeeping(n):
    s = GaussianState([1.2, -0.7], np.eye(2))
    out = propagate_values(s, 0.0, 0.3, n)
    assert out.mean @ out.mean == pytest.approx(0.7 * (s.mean @ s.mean), rel=1e-12)


def test_slicing_monotone_and_convergent():
    for gl, al in [(0.3, 0.2), (1.0, 0.1), (1.0, 1.0 - 1e-6), (0.5, 0.5)]:
        mins = [min_max_variance(propagate_values(vacuum(), gl, al, n))[0]
                for n in (1, 2, 4, 8, 16, 64, 256)]
        assert np.all(np.diff(mins) < 0)
        a = min_max_variance(propagate_values(vacuum(), gl, al, 1000))[0]
        b = min_max_variance(propagate_values(vacuum(), gl, al, 2000))[0]
        assert abs(a - b) <= 1e-6


def test_slicing_matches_continuous_limit():
    from scipy.integrate import solve_ivp

    gl, al = 1.0, 0.3
    k = -np.log(1 - al)
    A = np.array([[0.0, gl], [0.0, 0.0]])

    def rhs(z, y):
        c = y.reshape(2, 2)
        return (A @ c + c @ A.T - k * (c - np.eye(2))).ravel()

    sol = solve_ivp(rhs, (0, 1), np.eye(2).ravel(), rtol=1e-12, atol=1e-14)
    cov = sol.y[:, -1].reshape(2, 2)
    out = propagate_values(vacuum(), gl, al, 2000)
    assert np.allclose(out.cov, cov, atol=1e-7)


def test_propagate_rejects_invalid_medium():
    m = MediumModel((LineComponent(0, 1, 1, 1.2),))
    with pytest.raises(ModelInvalidError):
        propagate(m, 0.0, vacuum())


def test_window_flag():
    m = default_model()
    assert m.in_window([0.0, 5.0])
    assert not m.in_window([20.0])
