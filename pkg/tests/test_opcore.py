import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from chanlearn._rng import stream
from chanlearn.opcore import (
    PauliIndex,
    all_pauli_indices,
    bell_basis,
    bell_diagonal_coefficients,
    bell_pinch,
    bell_projector,
    check_density,
    check_hermitian,
    herm_eig,
    herm_fn,
    max_entangled_vector,
    partial_trace,
    pauli_operator,
    trace_norm,
    von_neumann_entropy,
)


def rand_herm(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def rand_density(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


class TestPauliOperators:
    def test_identity_case(self):
        assert_allclose(pauli_operator(PauliIndex((0,), (0,))), np.eye(2))

    def test_y_from_phase_convention(self):
        # (+i)^{z.x} Z X = iZX = [[0,-i],[i,0]]
        got = pauli_operator(PauliIndex((1,), (1,)))
        assert_allclose(got, np.array([[0, -1j], [1j, 0]]), atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_unitarity(self, n):
        for idx in all_pauli_indices(n):
            p = pauli_operator(idx)
            assert np.linalg.norm(p @ p.conj().T - np.eye(2**n)) <= 1e-12

    def test_flat_index_roundtrip(self):
        for n in (1, 2, 3):
            for f in range(4**n):
                assert PauliIndex.from_flat(f, n).flat == f

    def test_mismatched_bitstrings_rejected(self):
        with pytest.raises(ValueError):
            PauliIndex((0, 1), (1,))


class TestBellProjectors:
    def test_canonical_bell_state(self):
        v = np.array([1, 0, 0, 1]) / np.sqrt(2)
        assert_allclose(bell_projector(PauliIndex((0,), (0,))), np.outer(v, v), atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2])
    def test_orthonormal_rank_one_resolution(self, n):
        idxs = all_pauli_indices(n)
        projs = [bell_projector(i) for i in idxs]
        for a, pa in enumerate(projs):
            w = np.linalg.eigvalsh(pa)
            assert abs(w.max() - 1) < 1e-12 and abs(w[:-1]).max() < 1e-12
            for b, pb in enumerate(projs):
                assert abs(np.trace(pa @ pb).real - (a == b)) < 1e-12
        assert np.linalg.norm(sum(projs) - np.eye(4**n)) <= 1e-10

    def test_basis_matrix_is_unitary(self):
        b = bell_basis(2)
        assert np.linalg.norm(b.conj().T @ b - np.eye(16)) < 1e-12

    def test_pinch_is_idempotent(self):
        rng = stream(7, "pinch")
        x = rand_herm(16, rng)
        once = bell_pinch(x, 2)
        assert np.linalg.norm(bell_pinch(once, 2) - once) <= 1e-12


class TestPartialTrace:
    def test_product_rule(self):
        rng = stream(11, "pt")
        x, y = rand_herm(2, rng), rand_herm(4, rng)
        assert_allclose(partial_trace(np.kron(x, y), (2, 4), "A"), np.trace(y) * x, atol=1e-12)
        assert_allclose(partial_trace(np.kron(x, y), (2, 4), "B"), np.trace(x) * y, atol=1e-12)

    def test_identity_channel_choi_marginal(self):
        gamma = 2 * bell_projector(PauliIndex((0,), (0,)))
        assert_allclose(partial_trace(gamma, (2, 2), "A"), np.eye(2), atol=1e-12)

    def test_composes_to_full_trace(self):
        rng = stream(12, "pt2")
        op = rand_herm(8, rng)
        a = np.trace(partial_trace(op, (2, 4), "A"))
        b = np.trace(partial_trace(op, (2, 4), "B"))
        assert abs(a - np.trace(op)) < 1e-12 and abs(b - np.trace(op)) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(6), (2, 4), "A")

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_linear_and_trace_preserving(self, seed):
        rng = stream(seed, "pt-prop")
        x, y = rand_herm(8, rng), rand_herm(8, rng)
        a, b = rng.standard_normal(2)
        lhs = partial_trace(a * x + b * y, (4, 2), "A")
        rhs = a * partial_trace(x, (4, 2), "A") + b * partial_trace(y, (4, 2), "A")
        assert np.linalg.norm(lhs - rhs) < 1e-10
        assert abs(np.trace(lhs) - np.trace(a * x + b * y)) < 1e-10


class TestHermFn:
    def test_exp_of_zero(self):
        assert_allclose(herm_fn(np.zeros((4, 4)), "exp"), np.eye(4), atol=1e-14)

    def test_log_of_scaled_identity(self):
        assert_allclose(herm_fn(np.e * np.eye(3), "log"), np.eye(3), atol=1e-12)

    def test_exp_log_roundtrip_on_density(self):
        rng = stream(5, "roundtrip")
        for _ in range(10):
            rho = rand_density(8, rng)
            back = herm_fn(herm_fn(rho, "log"), "exp")
            assert np.linalg.norm(back - rho) <= 1e-9 * max(np.linalg.norm(rho), 1)

    def test_log_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            herm_fn(np.diag([1.0, 0.0]), "log")

    def test_clamped_log_survives_singular(self):
        out = herm_fn(np.diag([1.0, 0.0]), "clamped-log")
        assert np.isfinite(out).all()

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_exp_is_positive_definite(self, seed):
        h = rand_herm(4, stream(seed, "exppd"))
        assert np.linalg.eigvalsh(herm_fn(h, "exp")).min() > 0

    def test_eigendecomposition_reconstructs(self):
        rng = stream(6, "eig")
        m = rand_herm(8, rng)
        w, v = herm_eig(m)
        assert np.linalg.norm((v * w) @ v.conj().T - m) <= 1e-9 * np.linalg.norm(m)


class TestTraceNorm:
    def test_diag(self):
        assert abs(trace_norm(np.diag([1.0, -1.0])) - 2.0) < 1e-12

    def test_density(self):
        rho = rand_density(4, stream(3, "tn"))
        assert abs(trace_norm(rho) - 1.0) < 1e-10

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_triangle_inequality(self, seed):
        rng = stream(seed, "tri")
        a, b = rand_herm(4, rng), rand_herm(4, rng)
        assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-10


class TestValidators:
    def test_hermitian_rejects(self):
        with pytest.raises(ValueError):
            check_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_density_rejects_trace(self):
        with pytest.raises(ValueError):
            check_density(np.eye(2))

    def test_entropy_of_maximally_mixed(self):
        assert abs(von_neumann_entropy(np.eye(4) / 4) - np.log(4)) < 1e-12

    def test_bell_coefficients_match_projectors(self):
        rng = stream(9, "coef")
        x = rand_herm(4, rng)
        coeffs = bell_diagonal_coefficients(x, 1)
        direct = [np.trace(bell_projector(i) @ x).real for i in all_pauli_indices(1)]
        assert_allclose(coeffs, direct, atol=1e-12)

    def test_max_entangled_normalized(self):
        v = max_entangled_vector(2)
        assert abs(np.linalg.norm(v) - 1) < 1e-14
