import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hilbert import (
    DensityMatrix,
    SpaceDims,
    annihilation_resonator,
    basis_state,
    identity,
    lowering_qubit,
    maximally_mixed,
    populations,
    projector,
    thermal_state,
    transition,
)
from validation import NumericalIntegrityError, ParamValidationError


def test_basis_ordering_is_qubit_major():
    dims = SpaceDims(4)
    assert dims.dim == 12
    assert dims.index("g", 0) == 0
    assert dims.index("e", 2) == 6
    assert dims.index(2, 3) == 11


def test_index_outside_space():
    with pytest.raises(IndexError):
        SpaceDims(3).index("g", 3)


def test_n_fock_lower_bound():
    with pytest.raises(ParamValidationError):
        SpaceDims(1)


def test_annihilation_two_levels():
    dims = SpaceDims(2)
    a = annihilation_resonator(dims).entries
    assert a.shape == (6, 6)
    expected = np.zeros((6, 6))
    for q in range(3):
        expected[dims.index(q, 0), dims.index(q, 1)] = 1.0
    np.testing.assert_array_equal(a, expected)


def test_number_operator_diagonal():
    dims = SpaceDims(5)
    a = annihilation_resonator(dims)
    n = (a.dag() @ a).entries
    np.testing.assert_allclose(np.diag(n).real, np.tile(np.arange(5), 3))
    assert np.count_nonzero(n - np.diag(np.diag(n))) == 0


def test_ladder_element():
    dims = SpaceDims(3)
    a = annihilation_resonator(dims).entries
    assert a[dims.index("g", 1), dims.index("g", 2)] == pytest.approx(math.sqrt(2.0))


def test_commutator_on_interior_block():
    dims = SpaceDims(6)
    a = annihilation_resonator(dims).entries
    comm = a @ a.conj().T - a.conj().T @ a
    for q in range(3):
        for m in range(dims.n_fock - 1):
            i = dims.index(q, m)
            assert comm[i, i] == pytest.approx(1.0)


def test_qubit_number_operator():
    dims = SpaceDims(3)
    b = lowering_qubit(dims)
    n = (b.dag() @ b).entries
    np.testing.assert_allclose(np.diag(n).real, np.repeat([0.0, 1.0, 2.0], 3))


def test_double_raising_reaches_f():
    dims = SpaceDims(3)
    bd = lowering_qubit(dims).dag().entries
    for m in range(3):
        column = (bd @ bd)[:, dims.index("g", m)]
        assert column[dims.index("f", m)] == pytest.approx(math.sqrt(2.0))
        assert np.count_nonzero(np.abs(column) > 1e-15) == 1


def test_qubit_ladder_truncates():
    b = lowering_qubit(SpaceDims(2)).entries
    np.testing.assert_array_equal(b @ b @ b, np.zeros_like(b))


def test_anharmonic_term_diagonal():
    dims = SpaceDims(2)
    b = lowering_qubit(dims).entries
    bd = b.conj().T
    term = bd @ bd @ b @ b
    np.testing.assert_allclose(np.diag(term).real, np.repeat([0.0, 0.0, 2.0], 2))
    n = bd @ b
    np.testing.assert_allclose(n @ n - n, term, atol=1e-15)


def test_transition_and_projector():
    dims = SpaceDims(2)
    up = transition(dims, "e", "g").entries
    assert up[dims.index("e", 1), dims.index("g", 1)] == 1.0
    p = projector(dims, "f").entries
    np.testing.assert_array_equal(p @ p, p)
    np.testing.assert_array_equal(identity(dims).entries, np.eye(6))


def test_thermal_state_weights():
    dims = SpaceDims(3)
    rho = thermal_state(dims, 0.15).entries
    assert rho[dims.index("g", 0), dims.index("g", 0)] == pytest.approx(0.85)
    assert rho[dims.index("e", 0), dims.index("e", 0)] == pytest.approx(0.15)
    assert populations(thermal_state(dims, 0.15)).P_e == pytest.approx(0.15)


def test_thermal_state_at_zero_is_ground():
    dims = SpaceDims(2)
    np.testing.assert_array_equal(thermal_state(dims, 0.0).entries, basis_state(dims, "g", 0).entries)


def test_thermal_state_rejects_inverted_population():
    with pytest.raises(ParamValidationError):
        thermal_state(SpaceDims(2), 0.5)


@given(st.floats(min_value=0.0, max_value=0.499))
def test_thermal_state_has_unit_trace(p_e):
    rho = thermal_state(SpaceDims(3), p_e)
    assert np.trace(rho.entries).real == pytest.approx(1.0)


def test_populations_of_f():
    pops = populations(basis_state(SpaceDims(3), "f", 0))
    assert pops.P_f == 1.0
    assert pops.P_g == pops.P_e == 0.0
    assert pops.n_mean == 0.0


def test_populations_of_maximally_mixed():
    pops = populations(maximally_mixed(SpaceDims(2)))
    np.testing.assert_allclose(pops.levels, np.full((3, 2), 1.0 / 6.0))
    assert pops.n_mean == pytest.approx(0.5)


def test_photon_number():
    assert populations(basis_state(SpaceDims(4), "g", 3)).n_mean == pytest.approx(3.0)


def test_density_matrix_rejects_non_hermitian():
    dims = SpaceDims(2)
    rho = np.eye(6, dtype=complex) / 6.0
    rho[0, 1] = 0.1
    with pytest.raises(NumericalIntegrityError):
        DensityMatrix(dims, rho)


def test_density_matrix_rejects_bad_trace():
    with pytest.raises(NumericalIntegrityError):
        DensityMatrix(SpaceDims(2), np.eye(6) / 3.0)


def test_density_matrix_rejects_wrong_shape():
    with pytest.raises(ValueError):
        DensityMatrix(SpaceDims(2), np.eye(4) / 4.0)


def test_operators_are_read_only():
    a = annihilation_resonator(SpaceDims(2))
    with pytest.raises(ValueError):
        a.entries[0, 1] = 5.0
