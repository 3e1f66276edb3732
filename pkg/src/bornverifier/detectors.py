"""Black-box spin detectors and the tomography that recovers their
affine Bloch response and POVM effect.

A detector is a probability oracle: it reports the chance of a "click"
when fed the spin factor of a composite state.  Two hidden ground-truth
models exist (a 2x2 effect operator, or an ancilla coupling followed by
a projector), but the tomography path only ever calls the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .qcore import (
    BlochVector,
    StateVector,
    DEFAULT_TOL,
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
)

_CENTROID = np.array([0.25, 0.25, 0.25])


@dataclass(frozen=True)
class EffectDetector:
    """Detector whose hidden model is an effect operator 0 <= M <= 1."""

    effect: np.ndarray

    def __post_init__(self):
        m = np.array(self.effect, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("effect must be a 2x2 matrix")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise ValueError("effect must be Hermitian")
        eigvals = np.linalg.eigvalsh(m)
        if eigvals[0] < -1e-9 or eigvals[-1] > 1.0 + 1e-9:
            raise ValueError(f"effect eigenvalues {eigvals} outside [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "effect", m)


@dataclass(frozen=True)
class AncillaDetector:
    """Detector whose hidden model couples the spin to an ancilla and
    projects the ancilla; the click probability is simulated exactly."""

    ancilla_dim: int
    coupling: np.ndarray
    projector: np.ndarray

    def __post_init__(self):
        m = int(self.ancilla_dim)
        coupling = np.array(self.coupling, dtype=complex)
        projector = np.array(self.projector, dtype=complex)
        if coupling.shape != (2 * m, 2 * m):
            raise ValueError("coupling must act on the spin+ancilla space")
        if not qcore.is_unitary(coupling, 1e-9):
            raise ValueError("coupling must be unitary")
        if projector.shape != (m, m):
            raise ValueError("projector must act on the ancilla space")
        if np.max(np.abs(projector - projector.conj().T)) > 1e-9:
            raise ValueError("projector must be Hermitian")
        if np.max(np.abs(projector @ projector - projector)) > 1e-9:
            raise ValueError("projector must be idempotent")
        coupling.setflags(write=False)
        projector.setflags(write=False)
        object.__setattr__(self, "ancilla_dim", m)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "projector", projector)


Detector = EffectDetector | AncillaDetector


@dataclass(frozen=True)
class AffineResponse:
    """Affine click response alpha . p + beta over the Bloch ball."""

    alpha: np.ndarray
    beta: float

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if a.shape != (3,):
            raise ValueError("alpha must be a real 3-vector")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def alpha_norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    def is_physical(self, tol: float = DEFAULT_TOL) -> bool:
        return (
            self.beta + self.alpha_norm <= 1.0 + tol
            and self.beta - self.alpha_norm >= -tol
        )

    def predict(self, p: BlochVector) -> float:
        """Direct dot-product evaluation (the oracle for linear_extension)."""
        return float(self.alpha @ p.as_array() + self.beta)


@dataclass(frozen=True)
class PovmEffect:
    """Click effect operator assembled from an affine response."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def click_probability(det: Detector, psi: StateVector, spin_factor: int = 0) -> float:
    """Probability that the detector clicks on the given spin factor."""
    if isinstance(det, EffectDetector):
        rho = qcore.reduced_density(psi, spin_factor)
        p = np.trace(det.effect @ rho).real
    elif isinstance(det, AncillaDetector):
        p = _simulate_ancilla_click(det, psi, spin_factor)
    else:
        raise TypeError(f"not a detector: {type(det).__name__}")
    return float(min(max(p, 0.0), 1.0))


def _simulate_ancilla_click(det: AncillaDetector, psi: StateVector, spin_factor: int) -> float:
    m = det.ancilla_dim
    ancilla = StateVector((m,), _basis_vec(m, 0))
    joint = qcore.tensor_product(psi, ancilla)
    tens = joint.as_tensor()
    ancilla_axis = joint.num_factors - 1
    # Apply the coupling on the (spin, ancilla) axis pair.
    tens = np.moveaxis(tens, (spin_factor, ancilla_axis), (0, 1))
    head = tens.reshape(2 * m, -1)
    head = det.coupling @ head
    projected = (np.kron(IDENTITY_2, det.projector) @ head).reshape(-1)
    return float(np.vdot(projected, projected).real)


def equivalent_effect(det: Detector) -> np.ndarray:
    """Ground-truth 2x2 effect of a detector.

    Reads the hidden model; it exists for consistency tests and for the
    circuit evaluator's post-measurement states, never for tomography.
    """
    if isinstance(det, EffectDetector):
        return np.array(det.effect)
    m = det.ancilla_dim
    block = det.coupling.conj().T @ np.kron(IDENTITY_2, det.projector) @ det.coupling
    # <i, anc0| block |j, anc0> over the spin indices i, j.
    return np.array(
        [[block[i * m, j * m] for j in range(2)] for i in range(2)], dtype=complex
    )


def complement_detector(det: Detector) -> Detector:
    """Detector whose click is the original's no-click outcome."""
    if isinstance(det, EffectDetector):
        return EffectDetector(IDENTITY_2 - det.effect)
    return AncillaDetector(
        det.ancilla_dim, det.coupling, np.eye(det.ancilla_dim) - det.projector
    )


def probe_fclick(det: Detector, p: BlochVector) -> float:
    """Click probability at a Bloch point, probed through the canonical
    purification (purification independence is tested, not assumed)."""
    return click_probability(det, qcore.purify(p), 0)


def extract_affine(det: Detector) -> AffineResponse:
    """Tomography from four reference probes: the ball center and the
    three positive axis poles."""
    beta = probe_fclick(det, BlochVector(0.0, 0.0, 0.0))
    alpha = np.array(
        [
            probe_fclick(det, BlochVector(1.0, 0.0, 0.0)) - beta,
            probe_fclick(det, BlochVector(0.0, 1.0, 0.0)) - beta,
            probe_fclick(det, BlochVector(0.0, 0.0, 1.0)) - beta,
        ]
    )
    return AffineResponse(alpha=alpha, beta=beta)


def linear_extension(resp: AffineResponse, p: BlochVector, tol: float = DEFAULT_TOL) -> float:
    """Click probability at ``p`` rebuilt by the four-step convex
    construction from the four reference values only.

    (i) interpolate along the x segment, (ii) lift into the xy triangle,
    (iii) lift into the reference tetrahedron, (iv) for points outside
    the tetrahedron, extrapolate along the line through the tetrahedron
    centroid.  The shortcut dot product lives in ``AffineResponse.predict``
    and serves as the independent oracle.
    """
    if p.norm > 1.0 + tol:
        raise ValueError(f"|p| = {p.norm} lies outside the Bloch ball")
    point = p.as_array()
    if _in_tetrahedron(point):
        return _step_tetrahedron(resp, _clip_tetra(point))
    t_lo, t_hi = _clip_line_to_tetrahedron(point)
    if t_hi - t_lo < 1e-12:
        raise ValueError("degenerate line: tetrahedron intersection is a point")
    direction = _CENTROID - point
    q1 = _clip_tetra(point + t_lo * direction)
    q2 = _clip_tetra(point + t_hi * direction)
    lam = t_lo / t_hi
    f_q1 = _step_tetrahedron(resp, q1)
    f_q2 = _step_tetrahedron(resp, q2)
    return (f_q1 - lam * f_q2) / (1.0 - lam)


def _step_segment(resp: AffineResponse, px: float) -> float:
    f_o = resp.beta
    f_a = resp.beta + resp.alpha[0]
    return (1.0 - px) * f_o + px * f_a


def _step_triangle(resp: AffineResponse, px: float, py: float) -> float:
    f_b = resp.beta + resp.alpha[1]
    if py >= 1.0 - 1e-15:
        return f_b
    base = _step_segment(resp, px / (1.0 - py))
    return (1.0 - py) * base + py * f_b


def _step_tetrahedron(resp: AffineResponse, point: np.ndarray) -> float:
    f_c = resp.beta + resp.alpha[2]
    px, py, pz = point
    if pz >= 1.0 - 1e-15:
        return f_c
    base = _step_triangle(resp, px / (1.0 - pz), py / (1.0 - pz))
    return (1.0 - pz) * base + pz * f_c


def _in_tetrahedron(point: np.ndarray, slack: float = 1e-12) -> bool:
    return bool(np.all(point >= -slack) and point.sum() <= 1.0 + slack)


def _clip_tetra(point: np.ndarray) -> np.ndarray:
    # Absorb clipping round-off so the step functions see clean inputs.
    cleaned = np.where(np.abs(point) < 1e-12, 0.0, point)
    return np.clip(cleaned, 0.0, None)


def _clip_line_to_tetrahedron(point: np.ndarray) -> tuple[float, float]:
    """Parameter interval [t_lo, t_hi] where point + t*(centroid - point)
    lies inside the reference tetrahedron."""
    direction = _CENTROID - point
    t_lo, t_hi = -math.inf, math.inf
    # Four half-spaces: x >= 0, y >= 0, z >= 0, x + y + z <= 1.
    normals = [
        (np.array([1.0, 0, 0]), 0.0, 1),
        (np.array([0, 1.0, 0]), 0.0, 1),
        (np.array([0, 0, 1.0]), 0.0, 1),
        (np.array([1.0, 1.0, 1.0]), 1.0, -1),
    ]
    for normal, offset, sign in normals:
        value = sign * (normal @ point - offset)
        slope = sign * (normal @ direction)
        if abs(slope) < 1e-15:
            if value < -1e-12:
                return (0.0, 0.0)
            continue
        crossing = -value / slope
        if slope > 0:
            t_lo = max(t_lo, crossing)
        else:
            t_hi = min(t_hi, crossing)
    return (max(t_lo, 0.0), t_hi)


def to_povm(resp: AffineResponse, tol: float = DEFAULT_TOL) -> PovmEffect:
    """Assemble the click effect alpha . sigma + beta * 1."""
    if not resp.is_physical(tol):
        raise ValueError(
            "non-physical affine response: probabilities leave [0, 1] "
            f"(beta={resp.beta}, |alpha|={resp.alpha_norm})"
        )
    ax, ay, az = resp.alpha
    matrix = ax * SIGMA_X + ay * SIGMA_Y + az * SIGMA_Z + resp.beta * IDENTITY_2
    return PovmEffect(matrix)


def mixed_click_probability(
    ensemble: list[tuple[float, StateVector]], det: Detector, spin_factor: int = 0
) -> float:
    """Law-of-total-probability click chance for a statistical mixture."""
    weights = [w for w, _ in ensemble]
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("ensemble weights must be non-negative and sum to 1")
    return float(
        sum(w * click_probability(det, psi, spin_factor) for w, psi in ensemble)
    )


def sg_up_detector() -> EffectDetector:
    """Projective click on spin-up (the reference apparatus's upper exit)."""
    return EffectDetector(np.diag([1.0, 0.0]).astype(complex))


def cnot_click_detector() -> AncillaDetector:
    """Ancilla model equivalent to the spin-up projector: copy the spin
    onto a qubit ancilla, then project the ancilla on its up state."""
    cnot = np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    )
    return AncillaDetector(2, cnot, np.diag([1.0, 0.0]).astype(complex))


def random_effect_detector(rng) -> EffectDetector:
    """Random valid effect: Haar basis with eigenvalues uniform in [0, 1]."""
    rng = qcore.as_rng(rng)
    w = qcore.random_unitary(2, rng)
    eigvals = rng.uniform(0.0, 1.0, size=2)
    return EffectDetector(w @ np.diag(eigvals) @ w.conj().T)


def random_ancilla_detector(rng, ancilla_dim: int | None = None) -> AncillaDetector:
    """Random ancilla model: Haar coupling on spin+ancilla plus a random
    rank-deficient projector."""
    rng = qcore.as_rng(rng)
    m = int(ancilla_dim) if ancilla_dim else int(rng.choice([2, 4]))
    coupling = qcore.random_unitary(2 * m, rng)
    rank = int(rng.integers(1, m))
    basis = qcore.random_unitary(m, rng)
    projector = basis[:, :rank] @ basis[:, :rank].conj().T
    return AncillaDetector(m, coupling, projector)


def random_detector(rng) -> Detector:
    """Even mix of the two ground-truth families."""
    rng = qcore.as_rng(rng)
    if rng.uniform() < 0.5:
        return random_effect_detector(rng)
    return random_ancilla_detector(rng)


def _basis_vec(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v
