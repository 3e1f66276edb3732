import numpy as np
import pytest

from bornverifier import circuits, detectors, qcore
from bornverifier.circuits import (
    Circuit,
    ConditionalExperiment,
    Gate,
    Measure,
    OutcomeQuery,
    check_identity_a1,
    check_identity_a5_decomposition,
    check_identity_causality,
    check_identity_multiplication,
    check_identity_normalization,
    check_identity_nosignal_measure,
    check_identity_nosignal_unitary,
    evaluate,
    evaluate_full,
    sg_measure,
)
from bornverifier.qcore import StateVector, spin_pair_state

UP = StateVector((2,), [1, 0])


class TestSgMeasure:
    def test_correlated_pair_branches(self):
        records = sg_measure(spin_pair_state(0.25), 1)
        by_outcome = {r.outcome: r for r in records}
        assert by_outcome["u"].probability == pytest.approx(0.75, abs=1e-12)
        assert by_outcome["d"].probability == pytest.approx(0.25, abs=1e-12)
        np.testing.assert_allclose(
            np.abs(by_outcome["u"].post_state.amplitudes), [1, 0, 0, 0], atol=1e-12
        )
        np.testing.assert_allclose(
            np.abs(by_outcome["d"].post_state.amplitudes), [0, 0, 0, 1], atol=1e-12
        )

    def test_pure_up_is_certain(self):
        records = sg_measure(UP, 0)
        probs = {r.outcome: r.probability for r in records}
        assert probs["u"] == 1.0
        assert probs["d"] == 0.0

    def test_balanced_pair(self):
        records = sg_measure(qcore.bell_state(), 0)
        assert records[0].probability == pytest.approx(0.5, abs=1e-12)

    def test_zero_branch_has_no_post_state(self):
        records = sg_measure(UP, 0)
        down = next(r for r in records if r.outcome == "d")
        assert down.post_state is None

    def test_branches_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            psi = qcore.random_state((2, 3), rng)
            records = sg_measure(psi, 0)
            assert all(r.probability >= 0 for r in records)
            assert sum(r.probability for r in records) == pytest.approx(1.0, abs=1e-10)

    def test_wire_out_of_range(self):
        with pytest.raises(ValueError):
            sg_measure(UP, 3)


class TestDetectorMeasure:
    def test_probability_matches_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            det = detectors.random_detector(rng)
            psi = qcore.random_state((2, 2), rng)
            records = circuits.detector_measure(psi, 0, det)
            click = next(r for r in records if r.outcome == "click")
            assert click.probability == pytest.approx(
                detectors.click_probability(det, psi, 0), abs=1e-12
            )
            assert sum(r.probability for r in records) == pytest.approx(1.0, abs=1e-10)
            for r in records:
                if r.post_state is not None:
                    assert abs(np.linalg.norm(r.post_state.amplitudes) - 1) < 1e-10


class TestEvaluate:
    def test_prepared_eigenstate(self):
        circuit = Circuit(UP, (Measure(0, "m"),))
        assert evaluate(circuit, {"m": "u"}) == 1.0

    def test_correlated_pair_chain(self):
        circuit = Circuit(
            spin_pair_state(0.25), (Measure(1, "a"), Measure(0, "b"))
        )
        assert evaluate(circuit, {"a": "u", "b": "u"}) == pytest.approx(0.75, abs=1e-12)
        assert evaluate(circuit, {"a": "u", "b": "d"}) == 0.0

    def test_fully_marginalized_is_one(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            psi = qcore.random_state((2, 2, 2), rng)
            circuit = Circuit(
                psi,
                (
                    Gate((1,), qcore.random_unitary(2, rng)),
                    Measure(0, "a"),
                    Measure(2, "b", detectors.random_detector(rng)),
                    Measure(1, "c"),
                ),
            )
            assert evaluate(circuit, None) == pytest.approx(1.0, abs=1e-10)

    def test_identity_gate_insertion_is_invariant(self):
        rng = np.random.default_rng(11)
        psi = qcore.random_state((2, 2), rng)
        u = qcore.random_unitary(2, rng)
        base = Circuit(psi, (Gate((0,), u), Measure(0, "m")))
        padded = Circuit(
            psi,
            (
                Gate((1,), np.eye(2, dtype=complex)),
                Gate((0,), u),
                Gate((0, 1), np.eye(4, dtype=complex)),
                Measure(0, "m"),
            ),
        )
        assert abs(evaluate(base, {"m": "u"}) - evaluate(padded, {"m": "u"})) < 1e-12

    def test_disjoint_gates_commute(self):
        rng = np.random.default_rng(12)
        psi = qcore.random_state((2, 2), rng)
        u0 = qcore.random_unitary(2, rng)
        u1 = qcore.random_unitary(2, rng)
        ab = Circuit(psi, (Gate((0,), u0), Gate((1,), u1), Measure(0, "m")))
        ba = Circuit(psi, (Gate((1,), u1), Gate((0,), u0), Measure(0, "m")))
        assert abs(evaluate(ab, {"m": "u"}) - evaluate(ba, {"m": "u"})) < 1e-12

    def test_zero_probability_conditioning_flagged(self):
        circuit = Circuit(UP, (Measure(0, "m"),))
        result = evaluate_full(circuit, {"m": "d"})
        assert result.probability == 0.0
        assert result.conditional_undefined
        assert result.undefined_labels == ("m",)
        # Conditioning mid-circuit on the impossible branch.
        chained = Circuit(
            spin_pair_state(0.0), (Measure(1, "a"), Measure(0, "b"))
        )
        result = evaluate_full(chained, {"a": "d", "b": "d"})
        assert result.probability == 0.0
        assert result.conditional_undefined

    def test_unknown_label_rejected(self):
        circuit = Circuit(UP, (Measure(0, "m"),))
        with pytest.raises(ValueError):
            evaluate(circuit, {"nope": "u"})

    def test_invalid_outcome_rejected(self):
        circuit = Circuit(UP, (Measure(0, "m"),))
        with pytest.raises(ValueError):
            evaluate(circuit, {"m": "click"})

    def test_gate_wire_order_semantics(self):
        # The first listed wire is the most significant index of the
        # gate matrix.
        rng = np.random.default_rng(14)
        psi = qcore.random_state((2, 2, 2), rng)
        u = qcore.random_unitary(4, rng)
        out = circuits.apply_unitary(psi, (2, 0), u)
        oracle = psi.as_tensor().transpose(2, 0, 1).reshape(4, 2)
        oracle = (u @ oracle).reshape(2, 2, 2).transpose(1, 2, 0)
        np.testing.assert_allclose(out.as_tensor(), oracle, atol=1e-14)

    def test_gate_after_measure_allowed(self):
        psi = qcore.random_state((2, 2), 13)
        circuit = Circuit(
            psi, (Measure(0, "m"), Gate((1,), qcore.SIGMA_X))
        )
        base = Circuit(psi, (Measure(0, "m"),))
        assert evaluate(circuit, {"m": "u"}) == pytest.approx(
            evaluate(base, {"m": "u"}), abs=1e-12
        )


class TestCircuitValidation:
    def test_non_unitary_gate_rejected(self):
        with pytest.raises(ValueError):
            Circuit(UP, (Gate((0,), np.array([[1, 1], [0, 1]], dtype=complex)),))

    def test_wire_range_checked(self):
        with pytest.raises(ValueError):
            Circuit(UP, (Measure(1, "m"),))

    def test_duplicate_labels_rejected(self):
        psi = qcore.random_state((2, 2), 3)
        with pytest.raises(ValueError):
            Circuit(psi, (Measure(0, "m"), Measure(1, "m")))

    def test_gate_dimension_mismatch(self):
        psi = qcore.random_state((2, 3), 3)
        with pytest.raises(ValueError):
            Circuit(psi, (Gate((1,), np.eye(2, dtype=complex)),))

    def test_measure_requires_spin(self):
        psi = qcore.random_state((2, 3), 3)
        with pytest.raises(ValueError):
            Circuit(psi, (Measure(1, "m"),))


class TestOutcomeQuery:
    def test_of_mapping_sorted(self):
        q = OutcomeQuery.of({"b": "u", "a": "d"})
        assert q.assignments == (("a", "d"), ("b", "u"))
        assert q.as_dict() == {"a": "d", "b": "u"}


class TestSampling:
    def test_frequencies_roughly_match(self):
        circuit = Circuit(qcore.bell_state(), (Measure(0, "m"),))
        shots = circuits.sample_outcomes(circuit, 123, shots=2000)
        ups = sum(1 for s in shots if s["m"] == "u")
        assert abs(ups / 2000 - 0.5) < 0.05


class TestIdentityFamilies:
    """Ground-truth identity checks over many random instances."""

    N = 1000

    def test_all_families_pass_at_tolerance(self):
        rng = np.random.default_rng(2024)
        worst = {}
        for _ in range(self.N):
            det = detectors.random_detector(rng)
            env = int(rng.choice([2, 3]))
            psi = qcore.random_state((2, env), rng)
            pair = qcore.random_state((2, 2), rng)
            single = qcore.random_state((2,), rng)
            phi = qcore.random_state((2,), rng)
            u_env = qcore.random_unitary(env, rng)
            reports = [
                check_identity_a1(single, phi, det, "click"),
                check_identity_a1(single, phi, None, "u"),
                check_identity_normalization(psi, det),
                check_identity_normalization(psi, None),
                check_identity_multiplication(
                    pair, det, 1, 0, str(rng.choice(["u", "d"]))
                ),
                check_identity_causality(psi, det, u_env),
                check_identity_nosignal_unitary(psi, det, u_env),
                check_identity_nosignal_measure(pair, det),
                check_identity_a5_decomposition(
                    float(rng.uniform()),
                    ConditionalExperiment(detector=det),
                ),
            ]
            for report in reports:
                assert report.passed, (report.name, report.max_deviation)
                worst[report.name] = max(
                    worst.get(report.name, 0.0), report.max_deviation
                )
        assert len(worst) == 7
        assert all(v <= 1e-9 for v in worst.values())

    def test_a5_decomposition_edge_weights(self):
        det = detectors.random_detector(np.random.default_rng(50))
        exp = ConditionalExperiment(detector=det)
        for lam in (0.0, 1.0):
            report = check_identity_a5_decomposition(lam, exp)
            assert report.passed
            details = dict(report.details)
            assert details["a_lambda"] == pytest.approx(1.0 - lam, abs=1e-12)

    def test_nosignal_unitary_with_countertransformation(self):
        # The environment-side inverse of a spin-side rotation must also
        # leave the click probability unchanged.
        rng = np.random.default_rng(51)
        det = detectors.random_detector(rng)
        basis_a = qcore.random_unitary(2, rng)
        basis_b = qcore.random_unitary(2, rng)
        psi = StateVector.from_amplitudes(
            (2, 2),
            0.8 * np.kron(basis_a[:, 0], basis_b[:, 0])
            + 0.6 * np.kron(basis_a[:, 1], basis_b[:, 1]),
        )
        counter = qcore.envariance_unitary(
            basis_b[:, 0], basis_b[:, 1], basis_b[:, 1], basis_b[:, 0]
        )
        report = check_identity_nosignal_unitary(psi, det, counter)
        assert report.passed

    def test_multiplication_on_reference_pair(self):
        # Assumption-5 post-states make the chain rule exact on the pair.
        det = detectors.sg_up_detector()
        for lam in (0.0, 0.3, 0.75, 1.0):
            report = check_identity_multiplication(
                spin_pair_state(lam), det, 1, 0, "u"
            )
            assert report.passed
