import numpy as np
import pytest

from qem.core.pauli import PauliString, pauli_basis, pauli_matrix, pauli_words


def test_index_is_base_four_with_first_letter_most_significant():
    assert PauliString("XZ").index() == 1 * 4 + 3
    assert PauliString.from_index(7, 2) == PauliString("XZ")
    assert PauliString.from_index(0, 3).is_identity()


def test_from_index_rejects_out_of_range():
    with pytest.raises(ValueError):
        PauliString.from_index(16, 2)


@pytest.mark.parametrize("letters", ["", "XA", "Q"])
def test_invalid_letters(letters):
    with pytest.raises(ValueError):
        PauliString(letters)


def test_weight_and_single():
    p = PauliString.single("Y", 2, 4)
    assert p.letters == "IIYI"
    assert p.weight == 1
    assert PauliString("xyzi").letters == "XYZI"


def test_matrix_is_kronecker_product():
    x = np.array([[0, 1], [1, 0]])
    z = np.diag([1, -1])
    assert np.allclose(pauli_matrix("XZ"), np.kron(x, z))
    assert np.allclose(pauli_matrix(PauliString("Y")) @ pauli_matrix("Y"), np.eye(2))


def test_matrix_is_read_only():
    with pytest.raises(ValueError):
        pauli_matrix("Z")[0, 0] = 2


def test_words_order():
    assert pauli_words(1) == ["I", "X", "Y", "Z"]
    assert pauli_words(2)[:5] == ["II", "IX", "IY", "IZ", "XI"]


@pytest.mark.parametrize("k", [1, 2])
def test_basis_is_orthonormal(k):
    basis = pauli_basis(k)
    gram = np.einsum("iab,jab->ij", basis.conj(), basis)
    assert basis.shape == (4**k, 2**k, 2**k)
    assert np.allclose(gram, np.eye(4**k))
