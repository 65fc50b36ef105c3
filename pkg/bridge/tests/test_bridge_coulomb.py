"""Native Coulomb-matrix and bagged-interaction representations."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molbridge.coulomb import (
    bob_layout,
    bob_vector,
    bob_width,
    cm_eigenvalues,
    coulomb_matrix,
    describe_bob_layout,
)
from molbridge.errors import ExportError
from molbridge.molfiles import Molecule3D


def mol(mol_id, numbers, coords):
    return Molecule3D(mol_id, tuple(numbers), np.asarray(coords, dtype=np.float64))


H2 = mol("h2", (1, 1), [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
WATER = mol("water", (8, 1, 1), [[0.0, 0.0, 0.119], [0.0, 0.763, -0.477], [0.0, -0.763, -0.477]])


def test_single_atom_matrix_and_spectrum():
    single = mol("h", (1,), [[0.0, 0.0, 0.0]])
    assert coulomb_matrix(single).tolist() == [[0.5]]
    assert cm_eigenvalues(single, 1).tolist() == [0.5]


def test_h2_hand_values():
    matrix = coulomb_matrix(H2)
    assert matrix.tolist() == [[0.5, 1.0], [1.0, 0.5]]
    # eigenvalues 1.5 and -0.5; descending absolute value keeps 1.5 first
    assert cm_eigenvalues(H2, 2) == pytest.approx([1.5, -0.5])


def test_diagonal_formula():
    matrix = coulomb_matrix(WATER)
    assert matrix[0, 0] == pytest.approx(0.5 * 8**2.4)
    assert matrix[1, 1] == 0.5


def test_matrix_against_loop_oracle():
    expected = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i == j:
                expected[i, j] = 0.5 * WATER.numbers[i] ** 2.4
            else:
                r = np.linalg.norm(WATER.coords[i] - WATER.coords[j])
                expected[i, j] = WATER.numbers[i] * WATER.numbers[j] / r
    assert np.allclose(coulomb_matrix(WATER), expected, rtol=1e-15, atol=0.0)


def test_spectrum_against_eigh_oracle():
    expected = np.linalg.eigvalsh(coulomb_matrix(WATER))
    got = cm_eigenvalues(WATER, 3)
    assert sorted(got) == pytest.approx(sorted(expected))
    assert list(np.abs(got)) == sorted(np.abs(expected), reverse=True)


def test_padding_appends_trailing_zeros():
    padded = cm_eigenvalues(H2, 5)
    assert padded[:2] == pytest.approx([1.5, -0.5])
    assert padded[2:].tolist() == [0.0, 0.0, 0.0]


def test_width_smaller_than_molecule_rejected():
    with pytest.raises(ExportError, match="exceeds the declared padding width"):
        cm_eigenvalues(WATER, 2)


def test_coincident_atoms_rejected():
    twin = mol("twin", (1, 1), [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ExportError, match="coincident atoms"):
        coulomb_matrix(twin)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.randoms(use_true_random=False))
def test_spectrum_invariants(n_atoms, rnd):
    numbers = tuple(rnd.choice((1, 6, 7, 8)) for _ in range(n_atoms))
    coords = np.array([[rnd.uniform(-3, 3) + 7 * k, rnd.uniform(-3, 3), rnd.uniform(-3, 3)] for k in range(n_atoms)])
    m = mol("rand", numbers, coords)
    width = n_atoms + 2
    spectrum = cm_eigenvalues(m, width)
    # padded tail is zero, magnitudes decay, and the multiset matches eigvalsh
    assert spectrum[n_atoms:].tolist() == [0.0] * 2
    magnitudes = np.abs(spectrum[:n_atoms])
    assert all(a >= b for a, b in zip(magnitudes, magnitudes[1:]))
    assert np.allclose(sorted(spectrum[:n_atoms]), np.linalg.eigvalsh(coulomb_matrix(m)))


def test_bob_layout_hand_example():
    layout = bob_layout((WATER, H2))
    assert layout == (((1,), 2), ((1, 1), 1), ((1, 8), 2), ((8,), 1))
    assert bob_width(layout) == 6
    assert describe_bob_layout(layout) == "H:2 H-H:1 H-O:2 O:1"


def test_bob_vector_hand_values():
    layout = bob_layout((WATER, H2))
    r_oh = float(np.linalg.norm(WATER.coords[0] - WATER.coords[1]))
    water_vec = bob_vector(WATER, layout)
    assert water_vec == pytest.approx([0.5, 0.5, 1.0 / 1.526, 8.0 / r_oh, 8.0 / r_oh, 0.5 * 8**2.4])
    h2_vec = bob_vector(H2, layout)
    assert h2_vec == pytest.approx([0.5, 0.5, 1.0, 0.0, 0.0, 0.0])


def test_bob_bags_sorted_descending():
    chain = mol("chain", (1, 1, 1), [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 3.0]])
    layout = bob_layout((chain,))
    vec = bob_vector(chain, layout)
    # H bag: three 0.5 entries; H-H bag: 1/1, 1/2, 1/3 sorted descending
    assert vec == pytest.approx([0.5, 0.5, 0.5, 1.0, 0.5, 1.0 / 3.0])


def test_bob_unknown_element_rejected():
    layout = bob_layout((H2,))
    carbon = mol("c", (6,), [[0.0, 0.0, 0.0]])
    with pytest.raises(ExportError, match="missing from the bag layout"):
        bob_vector(carbon, layout)


def test_bob_overflow_rejected():
    layout = bob_layout((H2,))
    triple = mol("h3", (1, 1, 1), [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 2.0]])
    with pytest.raises(ExportError, match="overflows the declared layout size"):
        bob_vector(triple, layout)


def test_deterministic():
    layout = bob_layout((WATER, H2))
    assert np.array_equal(bob_vector(WATER, layout), bob_vector(WATER, layout))
    assert np.array_equal(cm_eigenvalues(WATER, 4), cm_eigenvalues(WATER, 4))
