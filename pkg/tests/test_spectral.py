import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypersource import spectral
from hypersource.spectral import THZ, FrequencyGrid


def test_constants():
    c = spectral.CONSTANTS
    assert c.pump_omega == pytest.approx(2 * c.degeneracy_omega)
    assert 2 * math.pi * spectral.C_LIGHT / c.degeneracy_omega == pytest.approx(1556e-9)


def test_grid_is_symmetric_cell_centred():
    g = FrequencyGrid(10.0, 64)
    assert np.allclose(g.omega, -g.omega[::-1])
    assert g.step == pytest.approx(10.0 / 64)
    assert np.allclose(g.mirror(g.omega), -g.omega)
    with pytest.raises(ValueError):
        FrequencyGrid(10.0, 63)
    with pytest.raises(ValueError):
        FrequencyGrid(10.0, 32)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_channels_resolved_exactly(n):
    f = spectral.channel(n)
    g = spectral.make_grid(f, 2048)
    assert f.omega0 == pytest.approx(0.4 * n * THZ)
    assert g.edge_misalignment(f.edges) == pytest.approx(0.0, abs=1e-9)
    assert spectral.power_integral(f, g) == pytest.approx(1.0, abs=1e-12)


def test_channel_out_of_range():
    with pytest.raises(ValueError):
        spectral.channel(5)


def test_overlapping_bins_rejected():
    with pytest.raises(ValueError, match="overlapping"):
        spectral.make_two_bin_filter(1.0, 2.0)
    with pytest.raises(ValueError):
        spectral.make_two_bin_filter(1.0, 0.0)


def test_phase_sits_on_one_bin():
    f = spectral.make_two_bin_filter(2.0, 1.0, phi_freq=1.3)
    t = spectral.transmission(f, np.array([2.0, -2.0, 0.0, 3.0]))
    amp = 1 / math.sqrt(2.0)
    assert np.allclose(t, [amp, amp * np.exp(1.3j), 0, 0])


def test_contiguous_band_shares_edge_once():
    f = spectral.contiguous_band(2.0)
    t = spectral.transmission(f, np.array([0.0, -0.5, 0.5]))
    assert np.count_nonzero(t) == 3
    g = spectral.make_grid(f, 256)
    assert spectral.power_integral(f, g) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.05, 5.0), st.floats(0.01, 0.9))
def test_power_integral_close_to_one(omega0, frac):
    f = spectral.make_two_bin_filter(omega0, 2 * omega0 * frac)
    g = spectral.make_grid(f, 2048)
    assert spectral.power_integral(f, g) == pytest.approx(1.0, abs=0.02)


def test_nm_width():
    # 1 nm at 1556 nm is about 124 GHz
    assert spectral.nm_to_omega_width(1.0) / (2 * math.pi) == pytest.approx(123.8e9, rel=1e-3)
