import numpy as np
import pytest

from psrsqueeze.detection import (
    DetectionChain,
    ExcessNoiseModel,
    NoiseTrace,
    correct_to_cell_output,
    excess_noise,
    homodyne_noise,
    min_homodyne_noise,
    polarimeter_angle,
    rolloff_factor,
    sample_noise_trace,
    sample_variances,
    simulate_polarimeter,
)
from psrsqueeze.errors import InvalidParameterError, UnphysicalObservationError
from psrsqueeze.gaussian_core import GaussianState, shear, to_db, vacuum, variance_at
from psrsqueeze.medium import LineComponent, MediumModel, alpha_at, default_model, propagate_values

ETA_NOMINAL = 0.91 * 0.96


def flat(gl, **kw):
    return MediumModel((LineComponent(0.0, 1.0, gl, 0.0),), **kw)


@pytest.fixture
def nominal_chain():
    return DetectionChain.from_mode_matching(0.96, 0.91)


def test_chain_efficiency(nominal_chain):
    assert nominal_chain.total_efficiency == pytest.approx(ETA_NOMINAL, abs=1e-15)
    assert DetectionChain().mode_matching == pytest.approx(0.98 ** 2)
    for bad in (dict(visibility=0), dict(visibility=1.1), dict(pd_efficiency=0),
                dict(electronic_noise=-0.1), dict(rng_seed=-1)):
        with pytest.raises(InvalidParameterError):
            DetectionChain(**bad)


def test_polarimeter_angle():
    assert polarimeter_angle(1, 1) == 0
    assert polarimeter_angle(1.02, 0.98) == pytest.approx(0.01, abs=1e-15)
    with pytest.raises(InvalidParameterError):
        polarimeter_angle(0.5, -0.5)
    with pytest.raises(InvalidParameterError):
        polarimeter_angle(0, 0)


def test_simulate_polarimeter_noiseless():
    m = flat(2.0)
    assert simulate_polarimeter(m, 1.0, 0.0, total_power=3.0) == (1.5, 1.5)
    s1, s2 = simulate_polarimeter(m, 1.0, 0.005, total_power=2.0)
    assert (s1, s2) == pytest.approx((1.02, 0.98), abs=1e-14)
    eps = np.linspace(-0.08, 0.08, 17)
    s1, s2 = simulate_polarimeter(m, 1.0, eps, total_power=0.7)
    assert np.max(np.abs(polarimeter_angle(s1, s2) - 2.0 * eps)) < 1e-12


def test_simulate_polarimeter_deterministic():
    m = default_model()
    eps = np.linspace(-0.1, 0.1, 9)
    a = simulate_polarimeter(m, 0.3, eps, 1.0, 1e-3, seed=42)
    b = simulate_polarimeter(m, 0.3, eps, 1.0, 1e-3, seed=42)
    c = simulate_polarimeter(m, 0.3, eps, 1.0, 1e-3, seed=43)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])
    with pytest.raises(InvalidParameterError):
        simulate_polarimeter(m, 0.3, eps, 0.0)
    with pytest.raises(InvalidParameterError):
        simulate_polarimeter(m, 0.3, eps, 1.0, -1.0)


def test_excess_noise_spectral_law():
    m = default_model()
    ex = ExcessNoiseModel(m, peak_amplitude=0.8)
    assert ex.gamma_mhz == 6.0
    assert excess_noise(ex, 0.0, ex.peak_detuning) == pytest.approx(0.8, rel=1e-14)
    assert abs(ex.peak_detuning) < 0.01
    d = 0.42
    L = alpha_at(m, d) / ex.absorption_max
    assert excess_noise(ex, 6.0, d) == pytest.approx(0.8 * L / 2, rel=1e-14)
    assert excess_noise(ex, 60.0, d) == pytest.approx(0.8 * L / 101, rel=1e-14)
    with pytest.raises(InvalidParameterError):
        excess_noise(ex, -1.0, d)


def test_excess_normalization_is_absorption_maximum():
    m = default_model()
    ex = ExcessNoiseModel(m, 1.0)
    grid = np.linspace(-0.05, 0.05, 100001)
    assert ex.absorption_max == pytest.approx(alpha_at(m, grid).max(), rel=1e-9)
    assert ex.absorption_max >= alpha_at(m, grid).max()


def test_rolloff_factor():
    assert rolloff_factor(10.0, None) == 1.0
    assert rolloff_factor(10.0, np.inf) == 1.0
    assert rolloff_factor(10.0, 10.0) == pytest.approx(0.5)
    with pytest.raises(InvalidParameterError):
        rolloff_factor(1.0, 0.0)


def test_homodyne_sql_reference():
    chis = np.linspace(0, np.pi, 50)
    for chain in (DetectionChain(1, 1), DetectionChain(0.9, 0.8, 0.07)):
        assert np.allclose(homodyne_noise(vacuum(), chain, 0.0, chis), 1 + chain.electronic_noise,
                           rtol=0, atol=1e-15)


def test_homodyne_efficiency_mixing():
    # variance -> 0 limit: a very squeezed (but valid) state along X
    state = GaussianState([0, 0], np.diag([1e-12, 1e12]))
    chain = DetectionChain.from_mode_matching(0.5, 1.0, electronic_noise=0.03)
    assert homodyne_noise(state, chain, 0.0, 0.0) == pytest.approx(0.5 + 0.03, abs=1e-9)


def test_homodyne_nominal_chain_example(nominal_chain):
    state = shear(vacuum(), 1.0)
    chi = np.linspace(0, np.pi, 400001)
    brute = homodyne_noise(state, nominal_chain, 0.0, chi).min()
    expected = 0.8736 * (3 - np.sqrt(5)) / 2 + 0.1264
    assert brute == pytest.approx(expected, abs=1e-10)
    assert expected == pytest.approx(0.46009, abs=1e-5)
    assert min_homodyne_noise(state, nominal_chain, 0.0) == pytest.approx(expected, abs=1e-14)


def test_homodyne_monotone_in_excess_and_electronic_noise():
    state = propagate_values(vacuum(), 0.8, 0.1)
    chis = np.linspace(0, np.pi, 37)
    base = homodyne_noise(state, DetectionChain(0.95, 0.9, 0.01), 0.02, chis)
    assert np.all(homodyne_noise(state, DetectionChain(0.95, 0.9, 0.01), 0.03, chis) > base)
    assert np.all(homodyne_noise(state, DetectionChain(0.95, 0.9, 0.02), 0.02, chis) > base)


def test_efficiency_bound():
    rng = np.random.default_rng(9)
    chis = np.linspace(0, np.pi, 721)
    for _ in range(50):
        chain = DetectionChain(rng.uniform(0.5, 1), rng.uniform(0.5, 1), rng.uniform(0, 0.1))
        state = propagate_values(vacuum(), rng.uniform(-3, 3), rng.uniform(0, 0.5))
        floor = 1 - chain.total_efficiency + chain.electronic_noise
        assert homodyne_noise(state, chain, 0.0, chis).min() >= floor


def test_correct_to_cell_output(nominal_chain):
    assert correct_to_cell_output(1.0, nominal_chain) == pytest.approx(1.0, abs=1e-15)
    v = correct_to_cell_output(10 ** -0.085, nominal_chain)
    assert v == pytest.approx((10 ** -0.085 - (1 - 0.8736)) / 0.8736, rel=1e-14)
    assert v == pytest.approx(0.79652, abs=1e-5)
    assert to_db(v) == pytest.approx(-0.988, abs=1e-3)
    with pytest.raises(UnphysicalObservationError):
        correct_to_cell_output(0.12, nominal_chain)


def test_correction_inverts_chain():
    rng = np.random.default_rng(10)
    for _ in range(30):
        chain = DetectionChain(rng.uniform(0.5, 1), rng.uniform(0.5, 1), rng.uniform(0, 0.1))
        state = propagate_values(vacuum(), rng.uniform(-2, 2), rng.uniform(0, 0.3))
        chi = rng.uniform(0, np.pi)
        back = correct_to_cell_output(homodyne_noise(state, chain, 0.0, chi), chain)
        assert back == pytest.approx(variance_at(state, chi), abs=1e-12)


def test_noise_trace_validation():
    with pytest.raises(InvalidParameterError):
        NoiseTrace([0, 1], [1.0])
    with pytest.raises(InvalidParameterError):
        NoiseTrace([0, 1], [1.0, -1.0])
    with pytest.raises(InvalidParameterError):
        NoiseTrace([0, 1], [1.0, 1.0], sampled=[1.0])


def test_sample_trace_large_m():
    chain = DetectionChain(0.97, 0.9, 0.02, rng_seed=5)
    state = shear(vacuum(), 0.9)
    chis = np.linspace(0, np.pi, 4, endpoint=False)
    M = 10 ** 6
    tr = sample_noise_trace(state, chain, 0.05, chis, M)
    assert np.all(np.abs(tr.sampled - tr.analytic) < 5 * np.sqrt(2 / M) * tr.analytic)


def test_sample_trace_deterministic():
    chain = DetectionChain(rng_seed=77)
    chis = np.linspace(0, np.pi, 16, endpoint=False)
    a = sample_noise_trace(shear(vacuum(), 1), chain, 0.0, chis, 100, stream_key=(3,))
    b = sample_noise_trace(shear(vacuum(), 1), chain, 0.0, chis, 100, stream_key=(3,))
    c = sample_noise_trace(shear(vacuum(), 1), chain, 0.0, chis, 100, stream_key=(4,))
    assert np.array_equal(a.sampled, b.sampled)
    assert not np.array_equal(a.sampled, c.sampled)


def test_sample_point_independent_of_grid():
    v = np.array([1.0, 2.0, 0.5])
    full = sample_variances(v, 50, seed=1)
    assert sample_variances(v[:2], 50, seed=1)[1] == full[1]


def test_pooled_vacuum_estimate():
    chain = DetectionChain(1, 1, rng_seed=11)
    chis = np.linspace(0, np.pi, 64, endpoint=False)
    M = 10 ** 4
    tr = sample_noise_trace(vacuum(), chain, 0.0, chis, M)
    assert abs(tr.sampled.mean() - 1) < 3 * np.sqrt(2 / (M * chis.size))


def test_sample_trace_unbiased():
    chain = DetectionChain(rng_seed=2)
    chis = np.zeros(4000)
    tr = sample_noise_trace(vacuum(), chain, 0.0, chis, 10)
    # mean of 4000 estimates, each with relative sd sqrt(2/10)
    assert abs(tr.sampled.mean() - 1) < 5 * np.sqrt(0.2 / 4000)


def test_sample_requires_two_averages():
    with pytest.raises(InvalidParameterError):
        sample_noise_trace(vacuum(), DetectionChain(), 0.0, [0.0], 1)


def test_reference_trace():
    chain = DetectionChain(electronic_noise=0.05, rng_seed=3)
    tr = sample_noise_trace(shear(vacuum(), 1), chain, 0.0, np.linspace(0, 3, 8), 1000,
                            with_reference=True)
    assert np.allclose(tr.sql_analytic, 1.05)
    assert tr.sql_sampled is not None and not np.array_equal(tr.sql_sampled, tr.sampled)
