import cmath
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netzero_isac.tag_modulation import (
    DegenerateCircuitError,
    DuplicatePointError,
    Impedance,
    ReflectionCoefficient,
    TagModulator,
    build_constellation,
    export_constellation,
    gamma_from_normalized,
    import_constellation,
    load_for_gamma,
    normalize_impedance,
    power_split,
    reflection_coefficient,
)

ANTENNA = Impedance(50.0)


def test_worked_example():
    g = reflection_coefficient(Impedance(100, 50), ANTENNA).gamma
    assert abs(g - (0.4 + 0.2j)) < 1e-15


def test_normalized_impedance():
    z = normalize_impedance(Impedance(100, 50), ANTENNA)
    assert z == 2 + 1j
    assert normalize_impedance(ANTENNA, ANTENNA) == 1
    assert abs(gamma_from_normalized(z) - (0.4 + 0.2j)) < 1e-15


def test_matched_and_short():
    assert reflection_coefficient(Impedance(50), ANTENNA).gamma == 0
    assert reflection_coefficient(Impedance(0), ANTENNA).gamma == -1


def test_degenerate_circuit():
    with pytest.raises(DegenerateCircuitError):
        reflection_coefficient(Impedance(-50), ANTENNA)
    with pytest.raises(ZeroDivisionError):
        normalize_impedance(ANTENNA, Impedance(0))


def test_power_split():
    back, absorbed = power_split(ReflectionCoefficient(0.4, 0.2), 1.0)
    assert back == pytest.approx(0.2, abs=1e-15)
    assert absorbed == pytest.approx(0.8, abs=1e-15)
    assert power_split(ReflectionCoefficient(0.0), 3.0) == (0.0, 3.0)
    assert power_split(ReflectionCoefficient(0.0, -1.0), 3.0) == (3.0, 0.0)


def test_four_point_constellation():
    targets = [0.4 + 0.2j, -0.4 + 0.2j, 0.4 - 0.2j, -0.4 - 0.2j]
    const = build_constellation(TagModulator.from_targets(ANTENNA, targets))
    assert const.min_distance == pytest.approx(0.4, abs=1e-12)
    for p, t in zip(const.points, targets):
        assert abs(p.gamma - t) < 1e-12
    assert not const.degenerate


def test_single_matched_load_is_degenerate():
    const = build_constellation(TagModulator(ANTENNA, (Impedance(50),)))
    assert const.degenerate
    assert const.points[0].gamma == 0


def test_duplicate_loads_rejected():
    with pytest.raises(DuplicatePointError):
        build_constellation(TagModulator(ANTENNA, (Impedance(10), Impedance(10))))


def test_load_count_must_be_power_of_two():
    with pytest.raises(ValueError):
        TagModulator(ANTENNA, (Impedance(1), Impedance(2), Impedance(3)))


def test_psk_points_share_magnitude():
    const = build_constellation(TagModulator.psk(ANTENNA, 8, 0.6, math.pi / 8))
    mags = [abs(p.gamma) for p in const.points]
    assert max(mags) - min(mags) < 1e-12
    assert const.min_distance == pytest.approx(2 * 0.6 * math.sin(math.pi / 8), rel=1e-12)


def test_qam16_spacing():
    const = build_constellation(TagModulator.qam(ANTENNA, 16, 0.2))
    assert const.min_distance == pytest.approx(0.4, rel=1e-12)
    assert len(set(const.labels)) == 16


def test_export_import_round_trip():
    mod = TagModulator.qam(ANTENNA, 16, 0.2)
    back = import_constellation(export_constellation(mod), ANTENNA)
    assert back.symbol_labels == mod.symbol_labels
    assert "0000" in back.symbol_labels
    for a, b in zip(back.load_set, mod.load_set):
        assert a == b


def test_import_rejects_inconsistent_gamma():
    text = export_constellation(TagModulator.psk(ANTENNA, 2, 0.5)).replace("0.5,", "0.25,", 1)
    with pytest.raises(ValueError):
        import_constellation(text, ANTENNA)


@given(st.floats(0.0, 1.0 - 1e-6), st.floats(0.0, 2 * math.pi),
       st.floats(1.0, 500.0), st.floats(-200.0, 200.0))
@settings(max_examples=200, deadline=None)
def test_round_trip(radius, phase, r_a, x_a):
    antenna = Impedance(r_a, x_a)
    g = radius * cmath.exp(1j * phase)
    back = reflection_coefficient(load_for_gamma(g, antenna), antenna).gamma
    assert abs(back - g) < 1e-12


@given(st.floats(0.0, 1e6), st.floats(-1e6, 1e6), st.floats(1e-3, 1e4))
@settings(max_examples=200, deadline=None)
def test_passive_load_magnitude_at_most_one(r_l, x_l, r_a):
    g = reflection_coefficient(Impedance(r_l, x_l), Impedance(r_a))
    assert g.magnitude_sq <= 1.0 + 1e-12
    assert g.magnitude_sq == pytest.approx(g.real_part ** 2 + g.imag_part ** 2)
