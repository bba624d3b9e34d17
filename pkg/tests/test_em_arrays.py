"""Dipole impedance closed forms against quadrature oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from multiport.em_arrays import (
    FREE_SPACE_IMPEDANCE_OHM,
    ArrayGeometry,
    array_impedance_matrix,
    dipole_mutual_impedance,
    dipole_self_impedance,
    read_impedance_csv,
    sine_cosine_integrals,
    uniform_circular_array,
    write_impedance_csv,
)

# Frozen from the adaptive-quadrature oracle below.
SELF_IMPEDANCE_FROZEN = 73.07901024566654 + 42.51511468253748j
MUTUAL_HALF_WAVE_FROZEN = -12.523407445632417 - 29.907935918289358j
MUTUAL_FAR_ABS_FROZEN = 0.01908537963302672


def si_quadrature(x: float) -> float:
    val, _ = quad(lambda t: math.sin(t) / t, 0.0, x, limit=800)
    return val


def ci_quadrature(x: float) -> float:
    # Ci(x) = gamma + ln x + integral_0^x (cos t - 1)/t dt
    val, _ = quad(lambda t: (math.cos(t) - 1.0) / t, 0.0, x, limit=800)
    return 0.5772156649015328606 + math.log(x) + val


def emf_mutual_quadrature(spacing: float) -> complex:
    """Induced-EMF integral over the dipole, independent of Si/Ci."""
    k = 2 * math.pi

    def integrand(z: float, part: int) -> float:
        r1 = math.sqrt(spacing**2 + (z - 0.25) ** 2)
        r2 = math.sqrt(spacing**2 + (z + 0.25) ** 2)
        val = (
            1j
            * FREE_SPACE_IMPEDANCE_OHM
            / (4 * math.pi)
            * (np.exp(-1j * k * r1) / r1 + np.exp(-1j * k * r2) / r2)
            * math.cos(k * z)
        )
        return val.real if part == 0 else val.imag

    re = quad(integrand, -0.25, 0.25, args=(0,), limit=400, points=[0.0])[0]
    im = quad(integrand, -0.25, 0.25, args=(1,), limit=400, points=[0.0])[0]
    return complex(re, im)


class TestSineCosineIntegrals:
    @pytest.mark.parametrize(
        "x", [1e-3, 0.5, 1.0, 2.0, math.pi, 2 * math.pi, 7.999999, 8.000001, 12.0, 50.0, 6283.2]
    )
    def test_matches_quadrature_oracle(self, x):
        si, ci = sine_cosine_integrals(x)
        assert si == pytest.approx(si_quadrature(x), abs=5e-11)
        assert ci == pytest.approx(ci_quadrature(x), abs=5e-11)

    def test_continuous_across_series_cutoff(self):
        below = sine_cosine_integrals(8.0 - 1e-9)
        above = sine_cosine_integrals(8.0 + 1e-9)
        assert below[0] == pytest.approx(above[0], abs=1e-8)
        assert below[1] == pytest.approx(above[1], abs=1e-8)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            sine_cosine_integrals(0.0)
        with pytest.raises(ValueError):
            sine_cosine_integrals(-1.0)

    @given(st.floats(min_value=1e-6, max_value=1e4))
    @settings(max_examples=60, deadline=None)
    def test_si_bounded_and_ci_decaying(self, x):
        si, ci = sine_cosine_integrals(x)
        assert 0.0 <= si <= 1.8519370  # global maximum of Si
        # |Ci(x)| <= 2/x for x beyond the first zero crossing region
        if x > 10.0:
            assert abs(ci) <= 2.0 / x


class TestDipoleImpedances:
    def test_self_impedance_frozen_value(self):
        z = dipole_self_impedance()
        assert z.real == pytest.approx(SELF_IMPEDANCE_FROZEN.real, rel=1e-12)
        assert z.imag == pytest.approx(SELF_IMPEDANCE_FROZEN.imag, rel=1e-12)

    def test_self_impedance_against_emf_quadrature(self):
        # The mutual-impedance integral at vanishing spacing approaches
        # the self impedance of the infinitely thin dipole.
        oracle = emf_mutual_quadrature(1e-12)
        z = dipole_self_impedance()
        assert abs(z - oracle) < 1e-6

    def test_mutual_half_wavelength_frozen_value(self):
        z = dipole_mutual_impedance(0.5)
        assert z.real == pytest.approx(MUTUAL_HALF_WAVE_FROZEN.real, rel=1e-12)
        assert z.imag == pytest.approx(MUTUAL_HALF_WAVE_FROZEN.imag, rel=1e-12)

    @pytest.mark.parametrize("s", [0.1, 0.35, 0.5, 1.0, 2.5, 10.0])
    def test_mutual_against_emf_quadrature(self, s):
        oracle = emf_mutual_quadrature(s)
        z = dipole_mutual_impedance(s)
        assert abs(z - oracle) < 1e-8 * max(1.0, abs(oracle))

    def test_far_field_magnitude(self):
        z = dipole_mutual_impedance(1000.0)
        assert abs(z) == pytest.approx(MUTUAL_FAR_ABS_FROZEN, rel=1e-12)
        # Large-distance envelope eta0 / (2 pi^2 s).
        envelope = FREE_SPACE_IMPEDANCE_OHM / (2 * math.pi**2 * 1000.0)
        assert abs(z) == pytest.approx(envelope, abs=1e-4)

    def test_mutual_decays_with_distance(self):
        values = [abs(dipole_mutual_impedance(s)) for s in (0.5, 5.0, 50.0, 500.0)]
        assert values == sorted(values, reverse=True)

    def test_rejects_nonpositive_spacing(self):
        with pytest.raises(ValueError):
            dipole_mutual_impedance(0.0)


class TestGeometry:
    @given(
        st.integers(min_value=2, max_value=40),
        st.floats(min_value=0.05, max_value=3.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_adjacent_spacing_matches(self, n, d):
        geom = uniform_circular_array(n, d)
        for i in range(n):
            j = (i + 1) % n
            dist = float(np.linalg.norm(geom.positions[i] - geom.positions[j]))
            assert dist == pytest.approx(d, rel=1e-12)

    def test_single_element_at_origin(self):
        geom = uniform_circular_array(1, 0.5)
        assert geom.positions.shape == (1, 2)
        assert np.allclose(geom.positions, 0.0)

    def test_radius_formula(self):
        n, d = 9, 0.35
        geom = uniform_circular_array(n, d)
        radius = d / (2 * math.sin(math.pi / n))
        assert np.allclose(np.linalg.norm(geom.positions, axis=1), radius, rtol=1e-12)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            uniform_circular_array(0, 0.5)
        with pytest.raises(ValueError):
            uniform_circular_array(4, 0.0)
        with pytest.raises(ValueError):
            ArrayGeometry(2, 0.5, np.zeros((3, 2)))


class TestArrayMatrix:
    def test_single_element_value(self):
        z = array_impedance_matrix(uniform_circular_array(1, 0.5))
        assert z.shape == (1, 1)
        assert z[0, 0] == dipole_self_impedance()

    def test_diagonal_and_symmetry(self):
        z = array_impedance_matrix(uniform_circular_array(6, 0.4))
        assert np.allclose(np.diag(z), dipole_self_impedance())
        assert np.array_equal(z, z.T)

    def test_circulant_structure(self):
        # On a UCA the mutual impedance depends only on index separation.
        n = 8
        z = array_impedance_matrix(uniform_circular_array(n, 0.35))
        for k in range(1, n):
            vals = [z[i, (i + k) % n] for i in range(n)]
            assert np.allclose(vals, vals[0], rtol=1e-12, atol=1e-12)

    def test_entries_are_pairwise_mutuals(self):
        geom = uniform_circular_array(5, 0.45)
        z = array_impedance_matrix(geom)
        d01 = float(np.linalg.norm(geom.positions[0] - geom.positions[1]))
        assert z[0, 1] == dipole_mutual_impedance(d01)


class TestImpedanceCsv:
    def test_round_trip_exact(self, tmp_path):
        z = array_impedance_matrix(uniform_circular_array(4, 0.3))
        path = tmp_path / "z.csv"
        write_impedance_csv(str(path), z)
        back = read_impedance_csv(str(path))
        assert np.array_equal(back, z)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d\n0,0,1.0,2.0\n")
        with pytest.raises(ValueError):
            read_impedance_csv(str(path))

    def test_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("i,j,re_ohm,im_ohm\n")
        with pytest.raises(ValueError):
            read_impedance_csv(str(path))
