import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from magres.device import (
    MagnetParams,
    NeuronParams,
    asn_output,
    bsn_output,
    characterize_transfer,
    energy_barrier_from_material,
    noise_amplitude,
    retention_time,
)
from magres.errors import DomainError
from magres.rng import RngState

# evaluated with mpmath at 30 digits
RETENTION_U40_TAU1NS = 235385266.83701998
RETENTION_U1_TAU01NS = 2.718281828459045e-10
# mu0 * 1.1e6 A/m * 8e4 A/m * (pi * (25 nm)^2 * 1.5 nm) / 2 / (kB * 300 K)
BARRIER_HAND = 39.31688952513743


class TestRetention:
    def test_zero_barrier(self):
        assert retention_time(MagnetParams(0.0, 1e-9)) == 1e-9

    def test_memory_grade_barrier(self):
        tau = retention_time(MagnetParams(40.0, 1e-9))
        assert tau == pytest.approx(RETENTION_U40_TAU1NS, rel=1e-12)
        assert 3600 * 24 * 365 < tau < 3600 * 24 * 365 * 30  # years scale

    def test_one_kt(self):
        assert retention_time(MagnetParams(1.0, 0.1e-9)) == pytest.approx(RETENTION_U1_TAU01NS, rel=1e-12)

    @given(st.floats(0, 60), st.floats(0.01, 10), st.floats(1e-12, 1e-8))
    def test_monotone_and_linear(self, u, du, tau0):
        a = retention_time(MagnetParams(u, tau0))
        assert retention_time(MagnetParams(u + du, tau0)) > a
        assert retention_time(MagnetParams(u, 2 * tau0)) == pytest.approx(2 * a, rel=1e-12)

    def test_invalid(self):
        with pytest.raises(DomainError):
            MagnetParams(-1.0)
        with pytest.raises(DomainError):
            MagnetParams(1.0, attempt_time=0.0)


class TestEnergyBarrier:
    def test_zero_volume(self):
        assert energy_barrier_from_material(8e5, 1e5, 0.0) == 0.0

    def test_linear_in_volume(self):
        a = energy_barrier_from_material(8e5, 1e5, 1e-25)
        assert energy_barrier_from_material(8e5, 1e5, 2e-25) == pytest.approx(2 * a, rel=1e-15)

    def test_hand_computation(self):
        vol = math.pi * (25e-9) ** 2 * 1.5e-9
        assert energy_barrier_from_material(1.1e6, 8e4, vol) == pytest.approx(BARRIER_HAND, rel=1e-12)

    @pytest.mark.parametrize("args", [(-1, 1, 1), (1, -1, 1), (1, 1, -1e-27)])
    def test_negative_inputs(self, args):
        with pytest.raises(DomainError):
            energy_barrier_from_material(*args)

    def test_magnet_consistency(self):
        vol = math.pi * (25e-9) ** 2 * 1.5e-9
        m = MagnetParams.from_material(1.1e6, 8e4, vol)
        assert m.energy_barrier == pytest.approx(BARRIER_HAND, rel=1e-12)
        with pytest.raises(DomainError):
            MagnetParams(m.energy_barrier * (1 + 1e-6), 1e-9, 1.1e6, 8e4, vol)


class TestASN:
    def test_noiseless_origin(self):
        p = NeuronParams(alpha0=0.0)
        assert asn_output(0.0, p, RngState(1)) == 0.0

    @pytest.mark.parametrize("mode", ["constant", "saturating"])
    def test_saturates_at_rail(self, mode):
        p = NeuronParams(v_dd=0.8, noise_envelope=mode)
        out = asn_output(np.full(1000, 100 / p.beta), p, RngState(2))
        assert np.all(out <= 0.4)
        if mode == "saturating":
            assert np.all(out == pytest.approx(0.4, abs=1e-15))
        assert asn_output(100 / p.beta, NeuronParams(alpha0=0.0), RngState(0)) == 0.4

    def test_white_noise_mean(self):
        p = NeuronParams(alpha0=0.05, noise_envelope="constant")
        out = asn_output(np.zeros(100_000), p, RngState(3))
        assert abs(out.mean()) < 3 * 0.05 / math.sqrt(1e5)
        assert out.std() == pytest.approx(0.05, rel=0.02)

    def test_noiseless_curve_exact(self):
        p = NeuronParams(alpha0=0.0)
        v = np.linspace(-0.3, 0.3, 101)
        np.testing.assert_array_equal(asn_output(v, p, RngState(0)), 0.4 * np.tanh(20.0 * v))

    def test_saturating_envelope(self):
        p = NeuronParams(alpha0=0.05)
        assert noise_amplitude(0.0, p) == pytest.approx(0.05)
        assert noise_amplitude(1.0, p) < 1e-15

    def test_correlated_noise(self):
        p = NeuronParams(alpha0=0.05, noise_envelope="constant", noise_process="correlated",
                         correlation_time=20.0)
        rng = RngState(4)
        seq = np.array([asn_output(0.0, p, rng) for _ in range(20_000)])
        lag1 = np.corrcoef(seq[:-1], seq[1:])[0, 1]
        assert lag1 == pytest.approx(math.exp(-1 / 20.0), abs=0.02)
        assert seq.std() == pytest.approx(0.05, rel=0.1)

    def test_determinism(self):
        p = NeuronParams()
        v = np.linspace(-0.1, 0.1, 50)
        a = asn_output(v, p, RngState(11))
        b = asn_output(v, p, RngState(11))
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, asn_output(v, p, RngState(12)))

    def test_rng_advances(self):
        rng = RngState(5)
        asn_output(np.zeros(7), NeuronParams(), rng)
        assert rng.draws == 7


class TestBSN:
    def test_zero_input_fair(self):
        out = bsn_output(np.zeros(100_000), NeuronParams(), RngState(6))
        assert set(np.unique(out)) == {-0.4, 0.4}
        lo, hi = stats.binom.ppf([0.005, 0.995], 100_000, 0.5)
        assert lo <= np.sum(out > 0) <= hi

    def test_closed_form_probability(self):
        assert (1 + math.tanh(1.0)) / 2 == pytest.approx(0.88079, abs=1e-5)

    def test_strong_negative_bias(self):
        p = NeuronParams()
        out = bsn_output(np.full(100_000, -50 / p.beta), p, RngState(7))
        assert np.sum(out > 0) == 0

    @pytest.mark.parametrize("bv", [-2, -1, 0, 1, 2])
    def test_binomial_law(self, bv):
        p = NeuronParams()
        n = 100_000
        out = bsn_output(np.full(n, bv / p.beta), p, RngState(100 + bv))
        prob = (1 + math.tanh(bv)) / 2
        lo, hi = stats.binom.ppf([0.005, 0.995], n, prob)
        assert lo <= np.sum(out > 0) <= hi


@settings(max_examples=60, deadline=None)
@given(v=st.floats(-1e3, 1e3), alpha0=st.floats(0, 2), seed=st.integers(0, 2**64 - 1),
       mode=st.sampled_from(["constant", "saturating"]))
def test_outputs_within_rails(v, alpha0, seed, mode):
    p = NeuronParams(alpha0=alpha0, noise_envelope=mode)
    a = asn_output(np.full(64, v), p, RngState(seed))
    b = bsn_output(np.full(64, v), p, RngState(seed))
    assert np.all(np.abs(a) <= p.v_dd / 2)
    assert np.all(np.abs(b) == p.v_dd / 2)


class TestCharacterize:
    def test_noiseless_equals_curve(self):
        p = NeuronParams(alpha0=0.0)
        t = characterize_transfer(p, -0.15, 0.15, 31, 10, RngState(0))
        np.testing.assert_array_equal(t.mean, p.v_dd * np.tanh(p.beta * t.v_in) / 2)

    def test_noiseless_odd_symmetry(self):
        t = characterize_transfer(NeuronParams(alpha0=0.0), -0.15, 0.15, 41, 5, RngState(0))
        np.testing.assert_array_equal(t.v_in, -t.v_in[::-1])
        np.testing.assert_array_equal(t.mean, -t.mean[::-1])

    def test_noisy_mean_within_mc_band(self):
        p = NeuronParams(alpha0=0.05)
        t = characterize_transfer(p, -3 / p.beta, 3 / p.beta, 21, 10_000, RngState(8))
        ideal = p.v_dd * np.tanh(p.beta * t.v_in) / 2
        tol = 4 * noise_amplitude(t.v_in, p) / math.sqrt(10_000)
        assert np.all(np.abs(t.mean - ideal) < tol)
        assert np.all(t.min <= t.mean) and np.all(t.mean <= t.max)
        assert np.all(np.diff(t.mean) > -tol[1:] - tol[:-1])

    def test_correlated_mode(self):
        p = NeuronParams(noise_process="correlated", correlation_time=3.0)
        t = characterize_transfer(p, -0.1, 0.1, 5, 200, RngState(9))
        assert t.mean.shape == (5,)

    @pytest.mark.parametrize("args", [(0.1, -0.1, 5, 10), (0.0, 0.0, 5, 10), (-1, 1, 1, 10), (-1, 1, 5, 0)])
    def test_bad_sweep(self, args):
        with pytest.raises(DomainError):
            characterize_transfer(NeuronParams(), *args, RngState(0))

    def test_csv(self, tmp_path):
        t = characterize_transfer(NeuronParams(alpha0=0.0), -0.1, 0.1, 3, 1, RngState(0))
        t.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "v_in,mean,min,max"
        assert len(lines) == 4
        assert lines[2] == "0,0,0,0"
        assert float(lines[3].split(",")[1]) == pytest.approx(0.4 * math.tanh(2.0), rel=1e-9)
