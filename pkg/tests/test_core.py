import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qndprop.core import (
    DimensionError,
    OscillatorBathSpec,
    SpinBathSpec,
    SystemParams,
    Tolerances,
    ValidationError,
    check_sector,
    coherent_overlap,
    validate_bath,
)

small = st.floats(-2, 2, allow_nan=False)
amplitude = st.builds(complex, small, small)
vectors = st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.lists(amplitude, min_size=n, max_size=n), st.lists(amplitude, min_size=n, max_size=n)))


def test_overlap_normalized():
    a = [0.3 - 1.1j, 2.0]
    assert coherent_overlap(a, a) == pytest.approx(1.0, abs=1e-15)


def test_overlap_with_vacuum():
    a = np.array([0.7 + 0.2j, -0.4j])
    assert coherent_overlap([0, 0], a) == pytest.approx(np.exp(-0.5 * np.sum(np.abs(a) ** 2)))


def test_overlap_closed_form_point():
    assert coherent_overlap([1.0], [1j]) == pytest.approx(np.exp(-1 + 1j), rel=1e-15)


def test_overlap_length_mismatch():
    with pytest.raises(DimensionError):
        coherent_overlap([0, 1], [0])


@given(vectors)
def test_overlap_hermitian_symmetry(pair):
    a, b = pair
    assert coherent_overlap(a, b) == pytest.approx(np.conj(coherent_overlap(b, a)), abs=1e-14)


@given(vectors)
def test_overlap_bounded(pair):
    a, b = pair
    val = abs(coherent_overlap(a, b))
    assert val <= 1 + 1e-14  # round-off in exp of a sum of squares
    if not np.allclose(a, b, atol=1e-6):
        assert val < 1


def test_empty_bath_is_valid():
    bath = OscillatorBathSpec([])
    assert validate_bath(bath) is bath


def test_zero_frequency_oscillator_names_mode():
    bath = OscillatorBathSpec([(1.0, 0.2), (0.0, 0.1)])
    with pytest.raises(ValidationError) as err:
        validate_bath(bath)
    assert err.value.violations[0][0] == 1
    assert "division-by-frequency" in str(err.value)


def test_negative_spin_frequency_allowed():
    bath = SpinBathSpec([(-1.0, 0.2)])
    assert validate_bath(bath) is bath


def test_non_finite_entries_rejected():
    with pytest.raises(ValidationError):
        validate_bath(SpinBathSpec([(math.inf, 0.2)]))
    with pytest.raises(ValidationError):
        validate_bath(OscillatorBathSpec([(1.0, math.nan)]))


def test_complex_coupling_rejected():
    with pytest.raises(ValidationError):
        OscillatorBathSpec([(1.0, 0.1 + 0.2j)])


@given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(-3, 3)), max_size=5))
@settings(max_examples=25)
def test_validation_idempotent(modes):
    bath = OscillatorBathSpec(modes)
    assert validate_bath(validate_bath(bath)) == validate_bath(bath)


def test_system_params_validation():
    with pytest.raises(ValidationError):
        SystemParams(math.nan)
    with pytest.raises(ValidationError):
        SystemParams(1.0, math.inf)


def test_tolerances_defaults_and_invariants():
    tol = Tolerances()
    assert (tol.rel_tol, tol.abs_tol, tol.max_fock, tol.max_dyson_order) == (1e-9, 1e-12, 64, 10)
    with pytest.raises(ValidationError):
        Tolerances(max_fock=1)
    with pytest.raises(ValidationError):
        Tolerances(rel_tol=0)


@pytest.mark.parametrize("bad", [0, 2, 0.5, "up"])
def test_sector_label(bad):
    assert check_sector(1) == 1 and check_sector(-1) == -1
    with pytest.raises(ValidationError):
        check_sector(bad)
