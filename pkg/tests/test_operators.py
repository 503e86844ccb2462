import numpy as np
import pytest

from pseudospec.errors import SingularMetric, SiteCountMismatch
from pseudospec.operators import (
    DenseOperator,
    OperatorExpr,
    PauliString,
    commutator_norm,
    expr,
    parity_operator,
    pseudo_hermiticity_residual,
    single_site,
    to_dense,
    two_site,
    u_operator,
)


def test_single_letter_matrices():
    x = to_dense(expr([(1.0, "X")]), 1).matrix
    assert np.array_equal(x, np.array([[0, 1], [1, 0]], dtype=complex))

    zz = to_dense(expr([(1.0, "ZZ")]), 2).matrix
    assert np.array_equal(zz, np.diag([1, -1, -1, 1]).astype(complex))


def test_sum_with_complex_coefficient():
    h = to_dense(expr([(1j, "Z"), (1.0, "X")]), 1).matrix
    assert np.array_equal(h, np.array([[1j, 1], [1, -1j]]))


def test_qubit_ordering_site1_most_significant():
    # "XI" must act on the first (most significant) qubit: kron(X, I)
    xi = to_dense(expr([(1.0, "XI")]), 2).matrix
    ix = to_dense(expr([(1.0, "IX")]), 2).matrix
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.array_equal(xi, np.kron(x, np.eye(2)))
    assert np.array_equal(ix, np.kron(np.eye(2), x))
    # and the helper indexes sites the same way
    assert np.array_equal(single_site("X", 1, 2).terms[0].letters, "XI")
    assert two_site("Z", 2, 4).terms[0].letters == "IZZI"


def test_site_count_mismatch():
    with pytest.raises(SiteCountMismatch):
        to_dense(expr([(1.0, "XI")]), 3)
    with pytest.raises(SiteCountMismatch):
        OperatorExpr((PauliString(1.0, "XX"), PauliString(1.0, "X")))
    with pytest.raises(SiteCountMismatch):
        PauliString(1.0, "XQ")


def test_to_dense_linearity():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        letters = ["".join(rng.choice(list("IXYZ"), n)) for _ in range(4)]
        coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
        total = to_dense(expr(list(zip(coeffs, letters))), n).matrix
        parts = sum(
            to_dense(expr([(c, s)]), n).matrix for c, s in zip(coeffs, letters)
        )
        assert np.allclose(total, parts, atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_parity_is_hermitian_involution(n):
    p = parity_operator(n).matrix
    assert np.array_equal(p, p.conj().T)
    assert np.allclose(p @ p, np.eye(2**n))


def test_parity_reverses_sites():
    p = parity_operator(4).matrix
    xiii = to_dense(single_site("X", 1, 4), 4).matrix
    iiix = to_dense(single_site("X", 4, 4), 4).matrix
    assert np.allclose(p @ xiii @ p, iiix)
    for letter in "XYZ":
        for j in range(1, 5):
            a = to_dense(single_site(letter, j, 4), 4).matrix
            b = to_dense(single_site(letter, 5 - j, 4), 4).matrix
            assert np.allclose(p @ a @ p, b)


def test_parity_single_site_is_identity():
    assert np.array_equal(parity_operator(1).matrix, np.eye(2))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_u_operator_hermitian_involution(n):
    u = u_operator(n).matrix
    assert np.array_equal(u, u.conj().T)
    assert np.allclose(u @ u, np.eye(2**n))
    # U anticommutes with every single-site sigma^z
    for j in range(1, n + 1):
        z = to_dense(single_site("Z", j, n), n).matrix
        assert np.allclose(u @ z + z @ u, 0.0)


def test_parity_commutes_with_u():
    for n in (2, 3, 4):
        assert commutator_norm(parity_operator(n), u_operator(n)) < 1e-14


def test_residual_zero_for_hermitian():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        h = a + a.conj().T
        assert pseudo_hermiticity_residual(h, np.eye(8)) < 1e-14


def test_residual_frozen_value():
    # h = i sigma^z against the identity metric: defect is 2|i| ||Z|| / ||Z||
    h = 1j * np.diag([1.0, -1.0])
    assert pseudo_hermiticity_residual(h, np.eye(2)) == pytest.approx(2.0, abs=1e-15)


def test_residual_scale_invariance():
    rng = np.random.default_rng(11)
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    zeta = np.eye(6)
    base = pseudo_hermiticity_residual(h, zeta)
    for s in (0.5, 3.0, 1e4):
        assert pseudo_hermiticity_residual(s * h, zeta) == pytest.approx(base, rel=1e-12)


def test_residual_zero_operator():
    assert pseudo_hermiticity_residual(np.zeros((4, 4)), np.eye(4)) == 0.0


def test_residual_detects_genuine_pseudo_hermiticity():
    # i sigma^z is pseudo-Hermitian under sigma^x
    h = 1j * np.diag([1.0, -1.0])
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert pseudo_hermiticity_residual(h, x) < 1e-15


def test_singular_metric_rejected():
    with pytest.raises(SingularMetric):
        pseudo_hermiticity_residual(np.eye(2), np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_dense_operator_validation():
    with pytest.raises(ValueError):
        DenseOperator(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        DenseOperator(np.full((2, 2), np.nan))
    op = DenseOperator(np.eye(8))
    assert op.n_sites == 3
