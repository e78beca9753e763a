import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from puf_aging.agingmodel import (PUBLISHED_AF, CORNERS_C, CalibrationError, ModelConfig, StressProfile,
                                  acceleration_factor, age, age_effective, calibrate, celsius, measure_p_intra,
                                  new_device, power_up, power_up_bits, readout_set, temperature_readout_set)
from puf_aging.bitcore import Role, fractional_hamming

T_REF = celsius(25.0)
SMALL = 2**14


@pytest.fixture(scope="module")
def device():
    return new_device(11, cell_count=2**16)


class TestNewDevice:
    def test_deterministic(self):
        assert new_device(3, cell_count=SMALL) == new_device(3, cell_count=SMALL)
        assert new_device(3, cell_count=SMALL) != new_device(4, cell_count=SMALL)

    def test_default_region_size(self):
        assert new_device(0).cell_count == 262_144

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            new_device(0, cell_count=0)

    def test_prefix_stability(self):
        # a cell depends on (seed, index) only, not on the region size
        a, b = new_device(9, cell_count=100), new_device(9, cell_count=SMALL)
        np.testing.assert_array_equal(a.mismatch, b.mismatch[:100])
        np.testing.assert_array_equal(a.aging_rate, b.aging_rate[:100])

    def test_marginals(self):
        cfg = ModelConfig()
        d = new_device(1, cfg, 2**17)
        assert np.std(d.mismatch) == pytest.approx(cfg.sigma_mismatch, rel=0.02)
        assert np.std(d.temp_sensitivity) == pytest.approx(cfg.sigma_temp_sens, rel=0.02)
        # half-normal mean is sigma * sqrt(2/pi)
        assert np.mean(d.aging_rate) == pytest.approx(cfg.sigma_aging_rate * math.sqrt(2 / math.pi), rel=0.02)
        assert np.all(d.aging_rate >= 0) and np.all(d.accumulated_shift == 0)

    def test_independent_aging_rates_when_uncorrelated(self):
        cfg = ModelConfig(aging_temp_correlation=0.0)
        d = new_device(1, cfg, 2**16)
        opposing = -np.sign(d.mismatch) * d.temp_sensitivity
        assert abs(np.corrcoef(opposing, d.aging_rate)[0, 1]) < 0.02

    def test_distinct_seeds_are_uncorrelated(self):
        fhd = [fractional_hamming(power_up(new_device(s, cell_count=SMALL), T_REF, 0),
                                  power_up(new_device(s + 100, cell_count=SMALL), T_REF, 0)) for s in range(10)]
        assert np.mean(fhd) == pytest.approx(0.5, abs=0.02)

    def test_cells_are_read_only(self, device):
        with pytest.raises(ValueError):
            device.mismatch[0] = 1.0
        c = device.cell(5)
        assert c.mismatch == device.mismatch[5]


class TestPowerUp:
    def test_noiseless_limit(self):
        cfg = ModelConfig(sigma_noise=1e-300)
        d = new_device(2, cfg, SMALL)
        np.testing.assert_array_equal(power_up_bits(d, T_REF, 7), (d.mismatch > 0).astype(np.uint8))

    def test_deterministic(self, device):
        assert power_up(device, T_REF, 5) == power_up(device, T_REF, 5)
        assert power_up(device, T_REF, 5) != power_up(device, T_REF, 6)

    def test_subset_matches_full(self, device):
        cells = np.array([60_000, 3, 17, 40_000])
        full = power_up_bits(device, celsius(80), 4)
        np.testing.assert_array_equal(power_up_bits(device, celsius(80), 4, cells), full[cells])

    def test_role_follows_age(self, device):
        assert power_up(device, T_REF, 0).role is Role.PRE_AGING
        assert power_up(age(device, 1.0), T_REF, 0).role is Role.POST_AGING

    def test_rejects_non_positive_temperature(self, device):
        with pytest.raises(ValueError):
            power_up(device, 0.0, 0)

    def test_default_rate_near_six_percent(self, device):
        assert measure_p_intra(device, 4) == pytest.approx(0.06, abs=0.01)


class TestAccelerationFactor:
    def test_no_stress(self):
        assert acceleration_factor(StressProfile(t_stress=T_REF, t_nominal=T_REF)) == 1.0

    def test_literal_value(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 50
        t_s, t_n = mpmath.mpf(celsius(80.0)), mpmath.mpf(celsius(25.0))
        expected = mpmath.exp(mpmath.mpf("-0.02") / mpmath.mpf("8.62e-5") * (1 / t_s - 1 / t_n) / mpmath.mpf("0.25"))
        got = acceleration_factor(StressProfile())
        assert got == pytest.approx(float(expected), rel=1e-13)
        assert got == pytest.approx(1.6238298596596704, rel=1e-13)

    def test_voltage_term(self):
        p = StressProfile(v_stress=2 * 3250.0, t_stress=T_REF, t_nominal=T_REF)
        assert acceleration_factor(p) == pytest.approx(2 ** 14)

    def test_override_applies_to_aging_only(self):
        p = StressProfile(af_override=PUBLISHED_AF)
        assert acceleration_factor(p) == pytest.approx(1.6238, abs=1e-4)
        assert p.effective_factor() == PUBLISHED_AF

    @pytest.mark.parametrize("kw", [{"t_stress": 0.0}, {"t_nominal": -1.0}, {"v_nominal": 0.0}])
    def test_rejects_bad_profile(self, kw):
        with pytest.raises(ValueError):
            StressProfile(**kw)


class TestAging:
    profile = StressProfile(af_override=PUBLISHED_AF)

    def test_zero_hours_is_identity(self, device):
        assert age(device, 0, self.profile) is device

    def test_published_effective_age(self, device):
        aged = age(device, 48, self.profile)
        assert aged.effective_age == pytest.approx(529.44)
        assert aged.effective_age / 24 == pytest.approx(22.06, abs=0.005)
        assert device.effective_age == 0.0

    def test_two_steps_equal_one(self, device):
        a = age(age(device, 24, self.profile), 24, self.profile)
        b = age(device, 48, self.profile)
        assert a.effective_age == b.effective_age
        np.testing.assert_array_equal(a.accumulated_shift, b.accumulated_shift)

    def test_shift_formula(self, device):
        aged = age_effective(device, 100.0)
        np.testing.assert_allclose(aged.accumulated_shift, device.aging_rate * 100.0 ** 0.25, rtol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 500), min_size=1, max_size=6))
    def test_shift_monotone(self, steps):
        d = new_device(0, cell_count=256)
        for h in steps:
            nxt = age_effective(d, h)
            assert np.all(nxt.accumulated_shift >= d.accumulated_shift)
            assert np.all(nxt.accumulated_shift >= 0)
            d = nxt

    def test_negative_rejected(self, device):
        with pytest.raises(ValueError):
            age(device, -1)

    def test_inter_distance_grows_with_age(self, device):
        ref = power_up_bits(device, T_REF, 0)
        rates = []
        for hours in (18, 48, 108):
            aged = age(device, hours, self.profile)
            rates.append(np.mean([np.mean(power_up_bits(aged, T_REF, s) != ref) for s in (1, 2, 3)]))
        assert rates[0] < rates[1] < rates[2]


class TestCalibrate:
    def test_hits_target(self):
        cfg = calibrate(ModelConfig(), 0.06, trials=4)
        fresh = new_device(777, cfg, 2**16)
        assert measure_p_intra(fresh, 4, seed=5) == pytest.approx(0.06, abs=0.005)
        other = dataclasses.replace(cfg, sigma_noise=ModelConfig().sigma_noise)
        assert other == ModelConfig()

    @pytest.mark.parametrize("target", [0.0, 0.5, -0.1])
    def test_unreachable_target(self, target):
        with pytest.raises(CalibrationError):
            calibrate(ModelConfig(), target)

    def test_more_noise_more_flips(self):
        cfg = ModelConfig()
        noisy = dataclasses.replace(cfg, sigma_noise=2 * cfg.sigma_noise)
        d = new_device(3, cfg, 2**16)
        assert measure_p_intra(dataclasses.replace(d, config=noisy), 4) > measure_p_intra(d, 4)


class TestReadoutSets:
    def test_nine_corners(self, device):
        sets = temperature_readout_set(device, [celsius(c) for c in CORNERS_C], 2, seed=1)
        assert len(sets) == 9
        assert [s.temperature for s in sets] == [celsius(c) for c in CORNERS_C]

    def test_single_and_empty(self, device):
        (one,) = temperature_readout_set(device, [T_REF], 1, seed=1)
        assert len(one) == 1 and one.role is Role.PRE_AGING
        assert temperature_readout_set(device, [], 3, seed=1) == []

    def test_distinct_evaluations_and_thread_independence(self, device):
        a = readout_set(device, T_REF, 4, seed=2)
        b = readout_set(device, T_REF, 4, seed=2, workers=4)
        assert a.matrix().tobytes() == b.matrix().tobytes()
        assert len({r.packed for r in a}) == 4

    def test_u_shape_around_room_temperature(self):
        # the +-10 C step moves the rate by ~0.0013, so sample a full region
        device = new_device(11)
        ref = readout_set(device, T_REF, 1, seed=0).matrix()[0]
        rate = {c: float((readout_set(device, celsius(c), 8, seed=1).matrix() != ref).mean())
                for c in CORNERS_C}
        for a in CORNERS_C:
            for b in CORNERS_C:
                if abs(a - 25) < abs(b - 25):
                    assert rate[a] < rate[b], (a, b, rate)

    def test_post_aging_label_override(self, device):
        rs = readout_set(device, T_REF, 1, seed=0, role=Role.POST_AGING)
        assert rs.role is Role.POST_AGING and rs.effective_age == 0.0
