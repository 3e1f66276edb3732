import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bornverifier import qcore
from bornverifier.qcore import (
    BlochVector,
    DimensionError,
    StateVector,
    bloch_polarization,
    envariance_unitary,
    purify,
    random_state,
    reduced_density,
    schmidt_decompose,
    spin_pair_state,
    tensor_product,
)

UP = StateVector((2,), [1, 0])
DOWN = StateVector((2,), [0, 1])


def partial_trace_oracle(psi: StateVector, keep: int) -> np.ndarray:
    # Independent route: full density matrix, then einsum over the rest.
    tens = psi.as_tensor()
    moved = np.moveaxis(tens, keep, 0)
    flat = moved.reshape(moved.shape[0], -1)
    return np.einsum("ik,jk->ij", flat, flat.conj())


def pauli_expectation_oracle(psi: StateVector, spin_factor: int) -> np.ndarray:
    dims = psi.factor_dims
    values = []
    for sigma in (qcore.SIGMA_X, qcore.SIGMA_Y, qcore.SIGMA_Z):
        op = np.eye(1, dtype=complex)
        for i, d in enumerate(dims):
            op = np.kron(op, sigma if i == spin_factor else np.eye(d))
        values.append((psi.amplitudes.conj() @ op @ psi.amplitudes).real)
    return np.array(values)


class TestTensorProduct:
    def test_basis_states(self):
        result = tensor_product(UP, DOWN)
        assert result.factor_dims == (2, 2)
        np.testing.assert_array_equal(result.amplitudes, [0, 1, 0, 0])

    def test_identity_matrices(self):
        np.testing.assert_array_equal(
            tensor_product(np.eye(2, dtype=complex), np.eye(2, dtype=complex)),
            np.eye(4),
        )

    def test_sigma_z_eigenvector(self):
        op = tensor_product(qcore.SIGMA_Z, qcore.IDENTITY_2)
        ud = tensor_product(UP, DOWN)
        np.testing.assert_allclose(op @ ud.amplitudes, ud.amplitudes, atol=1e-15)

    def test_dimension_cap(self):
        big = random_state([2] * 10, 1)  # exactly at the cap
        with pytest.raises(DimensionError):
            tensor_product(big, UP)

    def test_mixed_operands_rejected(self):
        with pytest.raises(TypeError):
            tensor_product(UP, np.eye(2))


class TestReducedDensity:
    def test_product_state(self):
        psi = tensor_product(UP, random_state((3,), 5))
        np.testing.assert_allclose(
            reduced_density(psi, 0), np.diag([1.0, 0.0]), atol=1e-12
        )

    def test_maximally_entangled(self):
        np.testing.assert_allclose(
            reduced_density(qcore.bell_state(), 0), np.eye(2) / 2, atol=1e-12
        )

    def test_correlated_pair(self):
        rho = reduced_density(spin_pair_state(0.25), 0)
        np.testing.assert_allclose(rho, np.diag([0.75, 0.25]), atol=1e-12)

    def test_matches_partial_trace_oracle(self):
        rng = np.random.default_rng(2)
        for dims in [(2, 2), (2, 5), (2, 2, 3), (3, 2, 2)]:
            spin = dims.index(2)
            psi = random_state(dims, rng)
            np.testing.assert_allclose(
                reduced_density(psi, spin),
                partial_trace_oracle(psi, spin),
                atol=1e-12,
            )

    def test_errors(self):
        psi = random_state((2, 3), 1)
        with pytest.raises(ValueError):
            reduced_density(psi, 2)
        with pytest.raises(ValueError):
            reduced_density(psi, 1)  # dimension 3 is not a spin


class TestBlochPolarization:
    def test_up_state(self):
        psi = tensor_product(UP, random_state((4,), 3))
        p = bloch_polarization(psi, 0)
        np.testing.assert_allclose(p.as_array(), [0, 0, 1], atol=1e-12)

    def test_singlet_is_unpolarized(self):
        singlet = StateVector.from_amplitudes((2, 2), [0, 1, -1, 0])
        np.testing.assert_allclose(
            bloch_polarization(singlet, 0).as_array(), [0, 0, 0], atol=1e-12
        )

    def test_correlated_pair(self):
        p = bloch_polarization(spin_pair_state(0.25), 0)
        np.testing.assert_allclose(p.as_array(), [0, 0, 0.5], atol=1e-12)

    def test_matches_expectation_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            psi = random_state((2, int(rng.integers(2, 6))), rng)
            np.testing.assert_allclose(
                bloch_polarization(psi, 0).as_array(),
                pauli_expectation_oracle(psi, 0),
                atol=1e-12,
            )

    def test_density_bloch_relation(self):
        # rho == (1 + sigma . p) / 2 entrywise.
        rng = np.random.default_rng(8)
        for _ in range(50):
            psi = random_state((2, 4), rng)
            p = bloch_polarization(psi, 0)
            np.testing.assert_allclose(
                reduced_density(psi, 0), qcore.density_from_bloch(p), atol=1e-10
            )


class TestSchmidtDecompose:
    def test_bell_state_degenerate(self):
        form = schmidt_decompose(qcore.bell_state())
        assert form.c1 == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert form.c2 == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        # Degenerate spectrum: correctness is the reconstruction only.
        np.testing.assert_allclose(
            form.reconstruct(), qcore.bell_state().amplitudes, atol=1e-9
        )

    def test_product_state_rank_one(self):
        psi = tensor_product(random_state((2,), 11), random_state((3,), 12))
        form = schmidt_decompose(psi)
        assert form.c1 == pytest.approx(1.0, abs=1e-12)
        assert form.c2 == pytest.approx(0.0, abs=1e-12)
        assert abs(np.vdot(form.b1, form.b2)) < 1e-9

    def test_correlated_pair_weights(self):
        form = schmidt_decompose(spin_pair_state(0.25))
        assert form.c1 == pytest.approx(math.sqrt(0.75), abs=1e-12)
        assert form.c2 == pytest.approx(math.sqrt(0.25), abs=1e-12)

    def test_reconstruction_and_orthogonality(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            env = int(rng.integers(2, 7))
            psi = random_state((2, env), rng)
            form = schmidt_decompose(psi)
            assert form.c1 >= form.c2 >= 0
            assert form.c1**2 + form.c2**2 == pytest.approx(1.0, abs=1e-10)
            assert abs(np.vdot(form.a1, form.a2)) < 1e-10
            assert abs(np.vdot(form.b1, form.b2)) < 1e-10
            assert np.linalg.norm(form.reconstruct() - psi.amplitudes) < 1e-9

    def test_coefficients_match_reduced_eigenvalues(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            psi = random_state((2, 4), rng)
            form = schmidt_decompose(psi)
            eigvals = np.linalg.eigvalsh(reduced_density(psi, 0))[::-1]
            np.testing.assert_allclose(
                [form.c1**2, form.c2**2], eigvals, atol=1e-10
            )

    def test_multi_factor_environment_flattened(self):
        psi = random_state((2, 2, 2), 31)
        form = schmidt_decompose(psi)
        assert form.b1.shape == (4,)
        assert np.linalg.norm(form.reconstruct() - psi.amplitudes) < 1e-9

    def test_phase_convention(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            form = schmidt_decompose(random_state((2, 3), rng))
            for a in (form.a1, form.a2):
                lead = next(x for x in a if abs(x) > 1e-12)
                assert lead.imag == pytest.approx(0.0, abs=1e-12)
                assert lead.real > 0

    def test_non_bipartite_rejected(self):
        with pytest.raises(ValueError):
            schmidt_decompose(UP)


class TestEnvarianceUnitary:
    def test_identity_case(self):
        basis = qcore.random_unitary(4, 5)
        u = envariance_unitary(basis[:, 0], basis[:, 1], basis[:, 0], basis[:, 1])
        np.testing.assert_allclose(u @ basis[:, 0], basis[:, 0], atol=1e-12)
        np.testing.assert_allclose(u @ basis[:, 1], basis[:, 1], atol=1e-12)

    def test_swap_case(self):
        e0, e1 = np.eye(2, dtype=complex)
        u = envariance_unitary(e0, e1, e1, e0)
        np.testing.assert_allclose(u, [[0, 1], [1, 0]], atol=1e-12)

    def test_random_pairs_postconditions(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            src = qcore.random_unitary(4, rng)
            dst = qcore.random_unitary(4, rng)
            u = envariance_unitary(src[:, 0], src[:, 1], dst[:, 0], dst[:, 1])
            np.testing.assert_allclose(u @ src[:, 0], dst[:, 0], atol=1e-10)
            np.testing.assert_allclose(u @ src[:, 1], dst[:, 1], atol=1e-10)
            np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-10)

    def test_non_orthogonal_rejected(self):
        e0, e1 = np.eye(2, dtype=complex)
        with pytest.raises(ValueError):
            envariance_unitary(e0, e0, e0, e1)


class TestPurify:
    def test_pure_pole(self):
        psi = purify(BlochVector(0, 0, 1))
        rho = reduced_density(psi, 0)
        np.testing.assert_allclose(rho, np.diag([1.0, 0.0]), atol=1e-12)

    def test_center_is_maximally_entangled(self):
        psi = purify(BlochVector(0, 0, 0))
        np.testing.assert_allclose(
            reduced_density(psi, 0), np.eye(2) / 2, atol=1e-12
        )

    def test_halfway_pole_weights(self):
        form = schmidt_decompose(purify(BlochVector(0, 0, 0.5)))
        assert form.c1**2 == pytest.approx(0.75, abs=1e-12)
        assert form.c2**2 == pytest.approx(0.25, abs=1e-12)
        np.testing.assert_allclose(np.abs(form.a1), [1, 0], atol=1e-9)
        np.testing.assert_allclose(np.abs(form.a2), [0, 1], atol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(
        st.tuples(
            st.floats(-1, 1, allow_nan=False),
            st.floats(-1, 1, allow_nan=False),
            st.floats(-1, 1, allow_nan=False),
        ).filter(lambda v: v[0] ** 2 + v[1] ** 2 + v[2] ** 2 <= 1.0)
    )
    def test_roundtrip_identity(self, components):
        p = BlochVector(*components)
        recovered = bloch_polarization(purify(p), 0)
        assert np.max(np.abs(recovered.as_array() - p.as_array())) < 1e-9

    def test_outside_ball_rejected(self):
        with pytest.raises(ValueError):
            purify(BlochVector(1.0, 1.0, 0.0))


class TestRandomState:
    def test_deterministic_given_seed(self):
        a = random_state((2, 3), 17)
        b = random_state((2, 3), 17)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)

    def test_normalized(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            psi = random_state((2, 2), rng)
            assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12

    def test_mean_polarization_vanishes(self):
        # Unitary invariance: the single-spin polarization averages to zero.
        rng = np.random.default_rng(19)
        n = 10**5
        total = np.zeros(3)
        for _ in range(n):
            total += bloch_polarization(random_state((2,), rng), 0).as_array()
        assert np.max(np.abs(total / n)) < 3.0 / math.sqrt(n)


class TestEig2x2:
    def test_matches_numpy_on_random_hermitian(self):
        rng = np.random.default_rng(40)
        for _ in range(100):
            z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            h = (z + z.conj().T) / 2
            eigvals, eigvecs = qcore.eig2x2_hermitian(h)
            np.testing.assert_allclose(
                eigvals, np.linalg.eigvalsh(h)[::-1], atol=1e-12
            )
            for k in range(2):
                residual = h @ eigvecs[:, k] - eigvals[k] * eigvecs[:, k]
                assert np.linalg.norm(residual) < 1e-10

    def test_degenerate_returns_standard_basis(self):
        eigvals, eigvecs = qcore.eig2x2_hermitian(np.eye(2, dtype=complex) / 2)
        np.testing.assert_array_equal(eigvecs, np.eye(2))
        np.testing.assert_allclose(eigvals, [0.5, 0.5])


class TestStateVectorValidation:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            StateVector((2,), [1.0, 1.0])

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            StateVector((2, 2), [1.0, 0.0])

    def test_rejects_tiny_factor(self):
        with pytest.raises(ValueError):
            StateVector((1, 4), [1, 0, 0, 0])

    def test_amplitudes_are_immutable(self):
        psi = random_state((2,), 3)
        with pytest.raises(ValueError):
            psi.amplitudes[0] = 0.0
