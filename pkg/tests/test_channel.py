import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from satmimo.capacity import eigen_profile
from satmimo.channel import (
    FEEDER_BLOCK_CENTERS_HZ,
    AtmosphericState,
    BelowHorizonError,
    CarrierConfig,
    ReflectorPattern,
    atmospheric_diagonal,
    downlink_channel,
    feeder_uplink_channel,
    first_null_u,
    four_reflector_payload,
    geodetic_to_ecef,
    half_power_angle_deg,
    half_power_u,
    hex_beam_layout,
    los_coefficient,
    los_matrix,
    los_matrix_from_positions,
    pattern_amplitude,
    pattern_gain,
    single_reflector_payload,
    wrap_phase,
)
from satmimo.geometry import CONSTANTS, GroundArray, OrbitArray, optimal_ground_spacing

C20 = CarrierConfig(20e9)
KA = CarrierConfig(19.95e9)


def test_carrier_wavelength():
    c = CarrierConfig(48e9)
    assert_allclose(c.wavelength_m * c.frequency_hz, CONSTANTS.speed_of_light_mps, rtol=1e-12)
    with pytest.raises(ValueError):
        CarrierConfig(0.0)


def test_feeder_block_centres_fill_the_bands():
    assert len(FEEDER_BLOCK_CENTERS_HZ) == 8
    assert_allclose(np.array(FEEDER_BLOCK_CENTERS_HZ[2:]) / 1e9, [47.45, 47.95, 48.45, 48.95, 49.45, 49.95])


class TestLosCoefficient:
    def test_integer_wavelength(self):
        lam = C20.wavelength_m
        h = los_coefficient(lam, lam, C20)
        assert abs(h) == pytest.approx(1 / (4 * np.pi))
        assert np.angle(h) == pytest.approx(0.0, abs=1e-12)

    def test_half_wavelength_is_pi(self):
        lam = C20.wavelength_m
        h = los_coefficient(lam * 1.5, lam, C20)
        assert abs(abs(np.angle(h)) - np.pi) < 1e-9

    def test_free_space_loss(self):
        h = los_coefficient(35786.1e3, 35786.1e3, C20)
        assert -20 * np.log10(abs(h)) == pytest.approx(209.54267055880595, abs=1e-9)
        assert -20 * np.log10(abs(h)) == pytest.approx(209.5, abs=0.1)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            los_coefficient(0.0, 1.0, C20)

    @given(st.floats(-1e10, 1e10))
    def test_wrap_range(self, cycles):
        ph = wrap_phase(cycles)
        assert -np.pi - 1e-12 <= ph <= np.pi + 1e-12


class TestLosMatrix:
    def test_single_antenna(self):
        m = los_matrix(GroundArray(0, 0, 0, 0, 1), OrbitArray(0, 0, 1), C20)
        assert m.shape == (1, 1)
        assert abs(m.entries[0, 0]) == pytest.approx(C20.wavelength_m / (4 * np.pi * 35786.1e3), rel=1e-9)

    def test_optimal_design_gram_is_scaled_identity(self):
        orbit = OrbitArray(0, 6, 2)
        d = optimal_ground_spacing(orbit, 20e9, 0, 0)
        m = los_matrix(GroundArray(0, 0, 0, d, 2), orbit, C20)
        assert_allclose(m.gram(), 2 * m.mean_gain**2 * np.eye(2), atol=1e-6 * m.mean_gain**2)

    def test_keyhole_spacing_is_rank_one(self):
        orbit = OrbitArray(0, 6, 2)
        d = optimal_ground_spacing(orbit, 20e9, 0, 0)
        m = los_matrix(GroundArray(0, 0, 0, 2 * d, 2), orbit, C20)
        lam = eigen_profile(m.entries).eigenvalues
        assert lam[1] <= 1e-6 * lam[0]

    def test_common_magnitude_and_mean_gain(self):
        m = los_matrix(GroundArray(38, -98, 0, 40e3, 2), OrbitArray(-115, 3, 2), CarrierConfig(48e9))
        assert_allclose(np.abs(m.entries), m.mean_gain, rtol=1e-15)
        assert m.mean_gain == pytest.approx(m.carrier.wavelength_m / (4 * np.pi * m.mean_range_m))

    def test_reciprocity(self):
        g, o = GroundArray(38, -98, 12, 40e3, 2), OrbitArray(-115, 3, 2)
        assert_allclose(los_matrix(g, o, C20, "orbit").entries, los_matrix(g, o, C20, "ground").entries.T, rtol=1e-12)
        with pytest.raises(ValueError):
            los_matrix(g, o, C20, "sideways")

    def test_offsets_match_absolute_positions(self):
        g, o = GroundArray(38, -98, 12, 40e3, 2), OrbitArray(-115, 3, 2)
        a = los_matrix(g, o, C20).entries
        b = los_matrix_from_positions(g.positions(), o.positions(), C20).entries
        # absolute positions lose a few microradians to rounding
        assert_allclose(a, b, rtol=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-60, 60), st.floats(-60, 60), st.integers(1, 4), st.integers(1, 4))
    def test_trace_identity(self, lat, dlon, m, n):
        lm = los_matrix(GroundArray(lat, dlon, 0, 30e3, m), OrbitArray(0, 5, n), C20)
        assert_allclose(np.trace(lm.gram()).real, m * n * lm.mean_gain**2, rtol=1e-9)


class TestAtmosphere:
    def test_clear_sky_identity(self):
        assert_allclose(atmospheric_diagonal(AtmosphericState.clear_sky(2)), np.eye(2))

    def test_six_db(self):
        assert AtmosphericState((6.0, 0.0)).magnitude[0] == pytest.approx(0.5012, abs=1e-4)

    def test_twenty_db_quarter_turn(self):
        d = atmospheric_diagonal(AtmosphericState((20.0,), (np.pi / 2,)))
        assert_allclose(d[0, 0], 0.1 * np.exp(-1j * np.pi / 2), atol=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            AtmosphericState((-1.0, 0.0))

    @given(st.floats(0, 60))
    def test_db_round_trip(self, a):
        mag = AtmosphericState((a,)).magnitude[0]
        assert 0 <= mag <= 1
        assert -20 * np.log10(mag) == pytest.approx(a, abs=1e-12)


class TestPattern:
    def test_boresight_limit(self):
        assert pattern_amplitude(0.0) == 1.0
        assert pattern_amplitude(1e-5) == pytest.approx(1.0, abs=1e-9)
        # series and Bessel branches meet
        assert pattern_amplitude(0.99e-4) == pytest.approx(float(pattern_amplitude(np.array([1.01e-4]))[0]), abs=1e-9)

    def test_frozen_roots(self):
        assert half_power_u() == pytest.approx(2.0712311784218578, abs=1e-10)
        assert first_null_u() == pytest.approx(5.9072416634493665, abs=1e-10)
        assert abs(pattern_amplitude(first_null_u())) < 1e-12

    def test_half_power_beamwidth(self):
        theta = half_power_angle_deg(2.6, KA)
        assert theta == pytest.approx(0.21832669503281427, rel=1e-9)
        p = ReflectorPattern(2.6, C20)
        th20 = np.radians(half_power_angle_deg(2.6, C20))
        g = pattern_gain(p, [np.cos(th20), np.sin(th20), 0.0])
        assert g**2 == pytest.approx(0.5, rel=0.02)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 5.9))
    def test_even_and_decreasing_on_main_lobe(self, u):
        assert pattern_amplitude(-u) == pytest.approx(pattern_amplitude(u))
        assert pattern_amplitude(u + 1e-3) <= pattern_amplitude(u) + 1e-12

    def test_invalid_diameter(self):
        with pytest.raises(ValueError):
            ReflectorPattern(0.0, C20)


class TestFeederUplink:
    ground = GroundArray(38, -98, 0, 40e3, 2)
    orbit = OrbitArray(-115, 3, 2)

    def test_block_diagonal_assembly(self):
        carriers = [CarrierConfig(f) for f in FEEDER_BLOCK_CENTERS_HZ]
        ch = feeder_uplink_channel(self.ground, self.orbit, carriers)
        assert ch.size == 16
        mask = np.kron(np.eye(8), np.ones((2, 2))).astype(bool)
        assert np.all(ch.assembled[~mask] == 0)
        for i, c in enumerate(carriers):
            assert_allclose(ch.assembled[2 * i:2 * i + 2, 2 * i:2 * i + 2], ch.blocks[i])

    def test_block_matches_independent_construction(self):
        c = CarrierConfig(48.45e9)
        ch = feeder_uplink_channel(self.ground, self.orbit, [c], sat_diameter_m=None)
        assert_allclose(ch.blocks[0], los_matrix(self.ground, self.orbit, c, "orbit").entries, rtol=1e-14)

    def test_optimal_spacing_block_is_orthogonal(self):
        c = CarrierConfig(48.45e9)
        dlon = -98 + 115
        d = optimal_ground_spacing(self.orbit, c.frequency_hz, 38, dlon)
        ch = feeder_uplink_channel(GroundArray(38, -98, 0, d, 2), self.orbit, [c])
        g = ch.blocks[0] @ ch.blocks[0].conj().T
        assert abs(g[0, 1]) <= 1e-4 * abs(g[0, 0])

    def test_rain_scales_first_column(self):
        c = CarrierConfig(48.45e9)
        clear = feeder_uplink_channel(self.ground, self.orbit, [c]).blocks[0]
        rain = feeder_uplink_channel(self.ground, self.orbit, [c], AtmosphericState((6.0, 0.0))).blocks[0]
        assert_allclose(rain[:, 0], clear[:, 0] * 10 ** (-6 / 20), rtol=1e-12)
        assert_allclose(rain[:, 1], clear[:, 1], rtol=1e-12)

    def test_zero_spacing_keyhole(self):
        ch = feeder_uplink_channel(GroundArray(38, -98, 0, 0, 2), self.orbit, [CarrierConfig(48e9)])
        lam = eigen_profile(ch.blocks[0]).eigenvalues
        assert lam[1] <= 1e-9 * lam[0]

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            feeder_uplink_channel(GroundArray(38, -98, 0, 1e3, 3), self.orbit, [C20])
        with pytest.raises(ValueError):
            feeder_uplink_channel(self.ground, self.orbit, [])
        with pytest.raises(ValueError):
            feeder_uplink_channel(self.ground, self.orbit, [C20], AtmosphericState((0.0,)))


class TestDownlink:
    layout = hex_beam_layout(-115, 40, -118, 2 * half_power_angle_deg(2.6, KA))
    payload = four_reflector_payload(layout, -115)

    def _beam_centres(self):
        sat = self.payload.satellite_position
        # intersect each boresight with the sphere
        d = self.layout.boresights
        b = d @ sat
        t = -b - np.sqrt(b**2 - (sat @ sat - CONSTANTS.earth_radius_m**2))
        p = sat + t[:, None] * d
        lat = np.degrees(np.arcsin(p[:, 2] / np.linalg.norm(p, axis=1)))
        lon = np.degrees(np.arctan2(p[:, 1], p[:, 0]))
        return lat, lon

    def test_layout_colours(self):
        assert self.layout.count == 16
        assert sorted(set(self.layout.colors)) == [0, 1, 2, 3]
        # adjacent lattice neighbours (closest pairs) never share a colour
        ang = np.degrees(np.arccos(np.clip(self.layout.boresights @ self.layout.boresights.T, -1, 1)))
        np.fill_diagonal(ang, np.inf)
        near = ang < 1.01 * self.layout.spacing_deg
        col = np.array(self.layout.colors)
        assert not np.any(near & (col[:, None] == col[None, :]))

    def test_reflector_index_is_colour(self):
        assert self.payload.reflector_of_feed == self.layout.colors
        centres = {tuple(np.round(c, 6)) for c in self.payload.phase_centers}
        assert len(centres) == 4
        sat = self.payload.satellite_position
        assert_allclose(np.linalg.norm(self.payload.phase_centers - sat, axis=1), 1.5, atol=1e-6)

    def test_user_at_beam_centre_sees_that_beam_strongest(self):
        lat, lon = self._beam_centres()
        h = downlink_channel(lat, lon, self.payload, KA).entries
        assert np.all(np.argmax(np.abs(h), axis=1) == np.arange(16))

    def test_identical_users_identical_rows(self):
        h = downlink_channel([40.0, 40.0], [-118.0, -118.0], self.payload, KA).entries
        assert_allclose(h[0], h[1])
        assert abs(np.vdot(h[0], h[1])) / np.linalg.norm(h[0]) ** 2 == pytest.approx(1.0)

    def test_amplitude_only_channel(self):
        h = downlink_channel([40.0], [-118.0], self.payload, KA).entries
        a = downlink_channel([40.0], [-118.0], self.payload, KA, with_phase=False).entries
        assert_allclose(a, np.abs(h), rtol=1e-12)

    def test_single_reflector_feeds_are_close(self):
        single = single_reflector_payload(self.layout, -115)
        offs = np.linalg.norm(single.phase_centers - single.satellite_position, axis=1)
        assert offs.max() < 0.05

    def test_below_horizon(self):
        with pytest.raises(BelowHorizonError):
            downlink_channel([0.0], [65.0], self.payload, KA)

    def test_geodetic_round_trip(self):
        p = geodetic_to_ecef(np.array([40.0]), np.array([-118.0]))
        assert_allclose(np.linalg.norm(p), CONSTANTS.earth_radius_m)
