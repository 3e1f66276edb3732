"""Exact dense complex linear algebra for small tensor-product spin systems.

States are complex amplitude vectors over an ordered list of factors
(spins of dimension 2, plus optional larger environment factors).
Amplitude ordering is big-endian over the factor list: the first factor
is the most significant index, and each spin factor uses basis order
(up, down).  All values are immutable after construction and every
operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-9
MAX_TOTAL_DIM = 1024
_DEGENERACY_TOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)


class DimensionError(ValueError):
    """Raised when a tensor product would exceed the configured size cap."""


def _frozen_array(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state over a tensor product of factors.

    ``factor_dims`` lists the dimension of each factor in order;
    ``amplitudes`` has length ``prod(factor_dims)`` in big-endian order.
    """

    factor_dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError(f"factor dimensions must all be >= 2, got {dims}")
        total = math.prod(dims)
        if total > MAX_TOTAL_DIM:
            raise DimensionError(
                f"total dimension {total} exceeds the maximum {MAX_TOTAL_DIM}"
            )
        amps = _frozen_array(self.amplitudes)
        if amps.ndim != 1 or amps.size != total:
            raise ValueError(
                f"amplitude length {amps.size} does not match factor dims {dims}"
            )
        if not np.all(np.isfinite(amps.view(float))):
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def num_factors(self) -> int:
        return len(self.factor_dims)

    def as_tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor."""
        return self.amplitudes.reshape(self.factor_dims)

    @staticmethod
    def from_amplitudes(factor_dims: Sequence[int], amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(tuple(factor_dims), amps / norm)


@dataclass(frozen=True)
class BlochVector:
    """Spin polarization vector; physical values satisfy |p| <= 1."""

    px: float
    py: float
    pz: float

    def __post_init__(self):
        for v in (self.px, self.py, self.pz):
            if not math.isfinite(v):
                raise ValueError("polarization components must be finite")

    @property
    def norm(self) -> float:
        return math.sqrt(self.px**2 + self.py**2 + self.pz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz])

    @staticmethod
    def from_array(p) -> "BlochVector":
        x, y, z = np.asarray(p, dtype=float)
        return BlochVector(float(x), float(y), float(z))


@dataclass(frozen=True)
class SchmidtForm:
    """Two-term Schmidt decomposition of a (2 x d) bipartite state.

    The state reconstructs as ``c1 * a1 (x) b1 + c2 * a2 (x) b2`` with
    c1 >= c2 >= 0, c1^2 + c2^2 = 1, and orthonormal pairs (a1, a2) and
    (b1, b2).
    """

    c1: float
    c2: float
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))

    def reconstruct(self) -> np.ndarray:
        return self.c1 * np.kron(self.a1, self.b1) + self.c2 * np.kron(self.a2, self.b2)


StateOrMatrix = Union[StateVector, np.ndarray]


def tensor_product(a: StateOrMatrix, b: StateOrMatrix) -> StateOrMatrix:
    """Kronecker product of two states (concatenating factor lists) or
    two operators."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        total = a.dim * b.dim
        if total > MAX_TOTAL_DIM:
            raise DimensionError(
                f"total dimension {total} exceeds the maximum {MAX_TOTAL_DIM}"
            )
        return StateVector(
            a.factor_dims + b.factor_dims, np.kron(a.amplitudes, b.amplitudes)
        )
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        if a.shape[0] * b.shape[0] > MAX_TOTAL_DIM:
            raise DimensionError("operator tensor product exceeds the size cap")
        return np.kron(a, b)
    raise TypeError("tensor_product operands must both be states or both matrices")


def reduced_density(psi: StateVector, spin_factor: int = 0) -> np.ndarray:
    """Reduced 2x2 density matrix of one spin factor (partial trace over
    the rest)."""
    _check_spin_factor(psi, spin_factor)
    tens = psi.as_tensor()
    moved = np.moveaxis(tens, spin_factor, 0).reshape(2, -1)
    return moved @ moved.conj().T


def bloch_polarization(psi: StateVector, spin_factor: int = 0) -> BlochVector:
    """Pauli expectation values of the designated spin factor."""
    rho = reduced_density(psi, spin_factor)
    px = float(2.0 * rho[0, 1].real)
    py = float(-2.0 * rho[0, 1].imag)
    pz = float((rho[0, 0] - rho[1, 1]).real)
    return BlochVector(px, py, pz)


def density_from_bloch(p: BlochVector) -> np.ndarray:
    """2x2 density matrix (1 + sigma.p) / 2."""
    return 0.5 * (
        IDENTITY_2 + p.px * SIGMA_X + p.py * SIGMA_Y + p.pz * SIGMA_Z
    )


def eig2x2_hermitian(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigendecomposition of a 2x2 Hermitian matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues descending and
    eigenvectors as columns, phase-fixed so the first component above
    threshold is real positive.  Near-degenerate spectra fall back to the
    standard basis.
    """
    a = rho[0, 0].real
    d = rho[1, 1].real
    b = rho[0, 1]
    mean = 0.5 * (a + d)
    half_gap = math.hypot(0.5 * (a - d), abs(b))
    mu1 = mean + half_gap
    mu2 = mean - half_gap
    if half_gap <= _DEGENERACY_TOL:
        vecs = np.eye(2, dtype=complex)
    elif abs(b) <= _DEGENERACY_TOL:
        vecs = np.eye(2, dtype=complex) if a >= d else np.eye(2, dtype=complex)[:, ::-1]
    else:
        # Pick the row formula whose leading component avoids the
        # cancellation mu1 - max(a, d), so near-basis eigenvectors keep
        # their tiny transverse parts.
        if a >= d:
            v1 = np.array([mu1 - d, np.conj(b)], dtype=complex)
        else:
            v1 = np.array([b, mu1 - a], dtype=complex)
        v1 /= np.linalg.norm(v1)
        v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
        vecs = np.column_stack([v1, v2])
    vecs = np.column_stack([fix_global_phase(vecs[:, 0]), fix_global_phase(vecs[:, 1])])
    return np.array([mu1, mu2]), vecs


def fix_global_phase(v: np.ndarray, tol: float = _DEGENERACY_TOL) -> np.ndarray:
    """Rotate a vector so its first component above ``tol`` is real positive."""
    for x in v:
        if abs(x) > tol:
            return v * (np.conj(x) / abs(x))
    return np.array(v, copy=True)


def schmidt_decompose(psi: StateVector, spin_factor: int = 0) -> SchmidtForm:
    """Schmidt decomposition of a bipartite spin/environment state.

    The factor at ``spin_factor`` must have dimension 2; all remaining
    factors are flattened into a single environment of dimension d.
    Computed from the closed-form eigendecomposition of the reduced spin
    density matrix: b_k = (<a_k| (x) 1) psi / c_k.
    """
    _check_spin_factor(psi, spin_factor)
    if psi.num_factors < 2:
        raise ValueError("state is not bipartite: no environment factor present")
    tens = np.moveaxis(psi.as_tensor(), spin_factor, 0).reshape(2, -1)
    env_dim = tens.shape[1]
    rho = tens @ tens.conj().T
    eigvals, eigvecs = eig2x2_hermitian(rho)
    c1 = math.sqrt(max(eigvals[0], 0.0))
    c2 = math.sqrt(max(eigvals[1], 0.0))
    a1 = eigvecs[:, 0]
    a2 = eigvecs[:, 1]
    b1 = _environment_vector(tens, a1, c1, env_dim, others=())
    b2 = _environment_vector(tens, a2, c2, env_dim, others=(b1,))
    return SchmidtForm(c1=c1, c2=c2, a1=a1, a2=a2, b1=b1, b2=b2)


def _environment_vector(tens, a, c, env_dim, others) -> np.ndarray:
    if c > _DEGENERACY_TOL:
        return np.conj(a) @ tens / c
    # Zero Schmidt weight: the environment direction is undefined, so
    # complete against the defined vectors by Gram-Schmidt.
    basis = gram_schmidt_complete(list(others), env_dim)
    return basis[len(others)]


def gram_schmidt_complete(vectors: list[np.ndarray], dim: int) -> list[np.ndarray]:
    """Extend a list of orthonormal vectors to a full orthonormal basis,
    scanning standard basis vectors in index order."""
    basis = [np.asarray(v, dtype=complex) for v in vectors]
    for i in range(dim):
        if len(basis) == dim:
            break
        cand = np.zeros(dim, dtype=complex)
        cand[i] = 1.0
        for u in basis:
            cand = cand - (np.conj(u) @ cand) * u
        norm = np.linalg.norm(cand)
        if norm > 1e-7:
            basis.append(cand / norm)
    if len(basis) != dim:
        raise ValueError("could not complete the basis; inputs not orthonormal?")
    return basis


def envariance_unitary(
    b1p: np.ndarray,
    b2p: np.ndarray,
    b1pp: np.ndarray,
    b2pp: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Unitary on the environment mapping {b1', b2'} onto {b1'', b2''}.

    Both input pairs must be orthonormal.  The completion is the
    Gram-Schmidt extension of each pair over standard basis vectors in
    index order, then U = sum_k |b''_k><b'_k| over the full bases.
    """
    src = [np.asarray(b1p, dtype=complex), np.asarray(b2p, dtype=complex)]
    dst = [np.asarray(b1pp, dtype=complex), np.asarray(b2pp, dtype=complex)]
    dim = src[0].size
    for pair in (src, dst):
        if pair[0].size != dim or pair[1].size != dim:
            raise ValueError("all environment vectors must have equal dimension")
        for v in pair:
            if abs(np.linalg.norm(v) - 1.0) > tol:
                raise ValueError("environment vectors must be unit vectors")
        if abs(np.conj(pair[0]) @ pair[1]) > tol:
            raise ValueError("environment vector pairs must be orthogonal")
    src_basis = gram_schmidt_complete(src, dim)
    dst_basis = gram_schmidt_complete(dst, dim)
    u = np.zeros((dim, dim), dtype=complex)
    for s, t in zip(src_basis, dst_basis):
        u += np.outer(t, np.conj(s))
    return u


def purify(p: BlochVector, tol: float = DEFAULT_TOL) -> StateVector:
    """Canonical two-spin purification with the given spin polarization.

    Eigendecomposes (1 + sigma.p)/2 and weights each eigenvector by the
    square root of its eigenvalue against a standard environment basis.
    """
    if p.norm > 1.0 + tol:
        raise ValueError(f"|p| = {p.norm} lies outside the Bloch ball")
    eigvals, eigvecs = eig2x2_hermitian(density_from_bloch(p))
    c1 = math.sqrt(max(eigvals[0], 0.0))
    c2 = math.sqrt(max(min(eigvals[1], 1.0), 0.0))
    amps = c1 * np.kron(eigvecs[:, 0], UP) + c2 * np.kron(eigvecs[:, 1], DOWN)
    return StateVector.from_amplitudes((2, 2), amps)


def random_state(factor_dims: Sequence[int], rng) -> StateVector:
    """Haar-random pure state (normalized independent complex Gaussians)."""
    rng = as_rng(rng)
    dims = tuple(int(d) for d in factor_dims)
    n = math.prod(dims)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return StateVector.from_amplitudes(dims, z)


def random_unitary(dim: int, rng) -> np.ndarray:
    """Haar-random unitary via QR with phase-fixed R diagonal."""
    rng = as_rng(rng)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_bloch(rng, surface: bool = False) -> BlochVector:
    """Uniform point of the Bloch ball (or its boundary sphere)."""
    rng = as_rng(rng)
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    r = 1.0 if surface else rng.uniform() ** (1.0 / 3.0)
    return BlochVector.from_array(r * v)


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def basis_state(factor_dims: Sequence[int], indices: Sequence[int]) -> StateVector:
    """Computational basis state |i_0 i_1 ...> for the given factor list."""
    dims = tuple(int(d) for d in factor_dims)
    amps = np.zeros(math.prod(dims), dtype=complex)
    flat = 0
    for d, i in zip(dims, indices):
        if not 0 <= i < d:
            raise ValueError(f"basis index {i} out of range for dimension {d}")
        flat = flat * d + i
    amps[flat] = 1.0
    return StateVector(dims, amps)


def spin_pair_state(lam: float) -> StateVector:
    """Two-spin state sqrt(1-lam)|uu> + sqrt(lam)|dd> for lam in [0, 1]."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {lam}")
    amps = np.zeros(4, dtype=complex)
    amps[0] = math.sqrt(1.0 - lam)
    amps[3] = math.sqrt(lam)
    return StateVector((2, 2), amps)


def bell_state() -> StateVector:
    """(|uu> + |dd>) / sqrt(2)."""
    return spin_pair_state(0.5)


def is_unitary(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(
        np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol
    )


def _check_spin_factor(psi: StateVector, spin_factor: int) -> None:
    if not 0 <= spin_factor < psi.num_factors:
        raise ValueError(
            f"factor index {spin_factor} out of range for {psi.num_factors} factors"
        )
    if psi.factor_dims[spin_factor] != 2:
        raise ValueError(
            f"factor {spin_factor} has dimension {psi.factor_dims[spin_factor]}, "
            "expected a spin (dimension 2)"
        )
