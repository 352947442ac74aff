from math import pi, sqrt

import numpy as np
import pytest

from polburst.atoms import build_scheme, mhz, system_layout
from polburst.pulses import (
    PI_POL,
    MaskedStirapPair,
    PulseSpec,
    Sin2,
    TopHat,
    coupling_matrix,
    drive_operators,
    envelope_csv,
    linear_pol,
    masked_stirap_pair,
    pump_polarization,
)


def test_sin2_envelope():
    env = Sin2(2.0, 10.0, t_on=1.0)
    assert env(1.0) == 0.0
    assert env(6.0) == pytest.approx(2.0)
    assert env(-1.0) == 0.0 and env(12.0) == 0.0


def test_tophat_envelope():
    env = TopHat(3.0, 2.0)
    assert env(0.0) == 3.0 and env(2.0) == 3.0 and env(2.1) == 0.0


def test_masked_pair_constant_rms_and_ordering():
    pair = MaskedStirapPair(1.0, 1.0, n=6, a=14)
    ts = np.linspace(0, 1, 101)
    s, p = np.array([masked_stirap_pair(pair, t) for t in ts]).T
    m = np.array([pair.mask(t) for t in ts])
    np.testing.assert_allclose(np.hypot(s, p), m, atol=1e-14)
    assert p[30] > s[30] and s[70] > p[70]  # cos envelope leads
    assert s[0] == pytest.approx(0.0, abs=1e-6) and p[-1] == pytest.approx(0.0, abs=1e-6)
    assert pair.width == pytest.approx(1 / 3)


def test_envelope_csv_header_and_rows():
    text = envelope_csv(MaskedStirapPair(mhz(41), 0.15), samples=11)
    lines = text.strip().split("\n")
    assert lines[0] == "t_us,omega_s_mhz,omega_p_mhz"
    assert len(lines) == 12


def test_pump_polarization_bright_couples_phi():
    s = build_scheme("rb_d1")
    for phi in (0.0, pi / 3, pi):
        spec = PulseSpec(TopHat(1.0, 1.0), 1, 1, pump_polarization(phi))
        m = coupling_matrix(s, spec)
        row = m[s.x]
        psi = s.phi_state(phi)
        dark = s.phi_state(phi + pi)
        assert abs(row @ psi) > 0.1
        assert abs(row @ dark) < 1e-12


def test_pulse_spec_validation():
    with pytest.raises(ValueError):
        PulseSpec(TopHat(1, 1), 2, 1, (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        PulseSpec(TopHat(1, 1), 2, 1, PI_POL, normalization="weird")
    s = build_scheme("rb_d1")
    with pytest.raises(KeyError):
        coupling_matrix(s, PulseSpec(TopHat(1, 1), 2, 3))


def test_strongest_normalisation_sets_rabi():
    s = build_scheme("rb_d2")
    layout = system_layout(s, None)
    spec = PulseSpec(TopHat(1.0, 1.0), 2, 1, PI_POL)
    _, coup = drive_operators(s, spec, layout)
    # g2 <-> x is the only pi channel of F'=1,mF'=0 from F=2: its matrix element is Omega/2
    assert abs(coup.elements[s.x, s.g2]) == pytest.approx(0.5)
    raw = PulseSpec(TopHat(1.0, 1.0), 2, 1, PI_POL, normalization="raw")
    _, coup_raw = drive_operators(s, raw, layout)
    assert abs(coup_raw.elements[s.x, s.g2]) == pytest.approx(0.5 * abs(s.coupling(s.g2, s.x, 0)))


def test_linear_pol_is_normalised():
    assert np.linalg.norm(linear_pol(0.3)) == pytest.approx(1.0)
    assert linear_pol(0.0)[0] == pytest.approx(1 / sqrt(2))
