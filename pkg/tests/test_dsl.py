import math
from pathlib import Path

import numpy as np
import pytest

from bornverifier import circuits, dsl
from bornverifier.dsl import DslParseError, parse, print_spec

GOLDEN = Path(__file__).parent / "golden"

PAIR_SOURCE = """\
wire w0 : 2
wire w1 : 2
state S = sqrt(0.75)*|uu> + sqrt(0.25)*|dd>
prepare S
measure w1 SG -> first
query up : first = u
"""


class TestParse:
    def test_state_amplitude_assembly(self):
        spec = parse(PAIR_SOURCE)
        np.testing.assert_allclose(
            spec.states["S"],
            [math.sqrt(0.75), 0.0, 0.0, math.sqrt(0.25)],
            atol=1e-15,
        )

    def test_eigenstate_query_is_certain(self):
        spec = parse(
            "wire w0 : 2\nstate up = |u>\nprepare up\n"
            "measure w0 SG -> m\nquery q : m = u\n"
        )
        assert circuits.evaluate(spec.to_circuit(), spec.query("q")) == 1.0

    def test_pair_query_values(self):
        spec = parse(PAIR_SOURCE)
        assert circuits.evaluate(spec.to_circuit(), spec.query("up")) == pytest.approx(
            0.75, abs=1e-12
        )

    def test_undeclared_wire_reference(self):
        source = "wire w0 : 2\nunitary X = [[0, 1], [1, 0]]\ngate X on w9\n"
        with pytest.raises(DslParseError) as excinfo:
            parse(source)
        err = excinfo.value
        assert err.line == 3
        assert err.token == "w9"
        assert source.splitlines()[err.line - 1][err.column - 1 :].startswith("w9")

    def test_complex_literals(self):
        spec = parse(
            "wire w0 : 2\nstate s = 0.6*|u> + 0.6-0.52915026221291817i*|d>\n"
        )
        amp = spec.states["s"][1]
        assert amp == complex(0.6, -0.52915026221291817)

    def test_negative_separator(self):
        spec = parse(
            "wire w0 : 2\nwire w1 : 2\n"
            "state m = sqrt(0.5)*|ud> - sqrt(0.5)*|du>\n"
        )
        assert spec.states["m"][2] == pytest.approx(-math.sqrt(0.5), abs=1e-15)

    def test_digit_kets_for_wide_wires(self):
        spec = parse(
            "wire spin : 2\nwire env : 4\n"
            "state s = sqrt(0.5)*|u0> + sqrt(0.5)*|d3>\n"
        )
        assert spec.states["s"][0] == pytest.approx(math.sqrt(0.5))
        assert spec.states["s"][7] == pytest.approx(math.sqrt(0.5))

    def test_ancilla_detector_declaration(self):
        spec = parse(
            "wire w0 : 2\n"
            "detector D = ancilla 2 coupling [[1, 0, 0, 0], [0, 1, 0, 0], "
            "[0, 0, 0, 1], [0, 0, 1, 0]] projector [[1, 0], [0, 0]]\n"
        )
        det = spec.detectors["D"]
        assert det.ancilla_dim == 2

    def test_empty_document(self):
        spec = parse("")
        assert spec.wires == ()
        assert print_spec(spec) == ""
        assert parse(print_spec(spec)) == spec


class TestParseErrors:
    CASES = [
        ("wire w0 : 1", "dimension"),
        ("wire w0 : 2\nwire w0 : 2", "already declared"),
        ("state s = |u>", "before any wire"),
        ("wire w0 : 2\nstate s = |uu>", "per wire"),
        ("wire w0 : 2\nstate s = |x>", "ket character"),
        ("wire e : 3\nstate s = |5>", "out of range"),
        ("wire w0 : 2\nstate s = 0.5*|u>", "not normalized"),
        ("wire w0 : 2\nunitary U = [[1, 1], [0, 1]]", "not unitary"),
        ("wire w0 : 2\ndetector D = effect [[2, 0], [0, 0]]", "invalid detector"),
        ("wire w0 : 2\nstate u = |u>\nprepare nope", "undefined state"),
        ("wire w0 : 2\nmeasure w0 XX -> m", "expected 'SG' or 'det'"),
        ("wire w0 : 2\nmeasure w0 SG -> m\nmeasure w0 SG -> m", "already used"),
        ("wire w0 : 2\nmeasure w0 SG -> m\nquery q : zz = u", "unknown measurement"),
        ("wire w0 : 2\nmeasure w0 SG -> m\nquery q : m = click", "outcome must be"),
        ("wire w0 : 2\nstate s = |u> @", "unexpected character"),
        ("wire w0 : 2\nmeasure w0 SG", "expected"),
        ("wire e : 3\nmeasure e SG -> m", "dimension 2"),
        ("wire w0 : 2\nunitary U = [[1, 0], [0, 1]]\ngate U on w0 w0", "distinct"),
        ("wire w0 : 2\nwire w1 : 3\nunitary U = [[1, 0], [0, 1]]\ngate U on w1", "span"),
    ]

    @pytest.mark.parametrize("source,fragment", CASES)
    def test_error_reported_with_position(self, source, fragment):
        with pytest.raises(DslParseError) as excinfo:
            parse(source)
        err = excinfo.value
        assert fragment in str(err)
        lines = source.splitlines()
        assert 1 <= err.line <= len(lines)
        assert 1 <= err.column <= len(lines[err.line - 1]) + 1


class TestPrint:
    def test_numbers_roundtrip_bit_exact(self):
        values = [0.1, 1.0 / 3.0, math.sqrt(2) / 2, 1e-17, 123456.789e-12]
        amps = np.array(values, dtype=complex)
        amps /= np.linalg.norm(amps)
        terms = " + ".join(
            f"{dsl.format_complex(a)}*|{k}>"
            for a, k in zip(amps, ["uuu", "uud", "udu", "udd", "duu"])
        )
        source = "wire a : 2\nwire b : 2\nwire c : 2\nstate s = " + terms + "\n"
        spec = parse(source)
        again = parse(print_spec(spec))
        np.testing.assert_array_equal(spec.states["s"], again.states["s"])

    def test_effect_entries_full_precision(self):
        third = 1.0 / 3.0
        source = f"wire w0 : 2\ndetector D = effect [[{third!r}, 0], [0, {third!r}]]\n"
        spec = parse(source)
        printed = print_spec(spec)
        assert "0.33333333333333331" in printed
        again = parse(printed)
        np.testing.assert_array_equal(
            spec.detectors["D"].effect, again.detectors["D"].effect
        )

    def test_complex_formatting(self):
        assert dsl.format_complex(0.5) == "0.5"
        assert dsl.format_complex(2j) == "2i"
        assert dsl.format_complex(1 - 2j) == "1-2i"
        assert dsl.format_complex(-1.5 + 0.25j) == "-1.5+0.25i"
        for value in (0.5, 2j, 1 - 2j, -1.5 + 0.25j, complex(-0.0, 1e-300)):
            token = dsl._tokenize_line(dsl.format_complex(value), 1)[0]
            assert dsl.parse_complex(token) == value

    def test_canonical_section_order(self):
        printed = print_spec(parse(PAIR_SOURCE))
        positions = [
            printed.index("wire "),
            printed.index("state "),
            printed.index("prepare "),
            printed.index("measure "),
            printed.index("query "),
        ]
        assert positions == sorted(positions)


class TestGoldenCorpus:
    FILES = sorted(GOLDEN.glob("*.qexp"))

    def test_corpus_is_large_enough(self):
        assert len(self.FILES) >= 30

    @pytest.mark.parametrize("path", FILES, ids=lambda p: p.name)
    def test_parse_print_reparse(self, path):
        spec = parse(path.read_text())
        printed = print_spec(spec)
        again = parse(printed)
        assert again == spec
        assert print_spec(again) == printed

    def test_corpus_covers_constructs(self):
        text = "\n".join(p.read_text() for p in self.FILES)
        for construct in (
            "wire ", "state ", "unitary ", "detector ", "effect", "ancilla",
            "prepare ", "gate ", "measure ", "SG", "det ", "query ", "sqrt(",
            "i*|",  # complex scalar attached to a ket
        ):
            assert construct in text, construct

    def test_reference_pair_file_evaluates(self):
        spec = dsl.parse_file(GOLDEN / "01_s_lambda.qexp")
        circuit = spec.to_circuit()
        assert circuits.evaluate(circuit, spec.query("both_up")) == pytest.approx(
            0.75, abs=1e-12
        )
        assert circuits.evaluate(circuit, spec.query("opposite")) == 0.0
        assert circuits.evaluate(circuit, spec.query("marginal")) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_four_spin_interpolation_file(self):
        spec = dsl.parse_file(GOLDEN / "11_lemma1_four_spin.qexp")
        circuit = spec.to_circuit()
        # After the relabelling gate the reference spin carries the
        # branch weights of the correlated pair.
        assert circuits.evaluate(circuit, spec.query("up_branch")) == pytest.approx(
            0.7, abs=1e-12
        )
        assert circuits.evaluate(circuit, spec.query("down_branch")) == pytest.approx(
            0.3, abs=1e-12
        )

    def test_detector_files_evaluate(self):
        spec = dsl.parse_file(GOLDEN / "09_detector_noisy.qexp")
        assert circuits.evaluate(
            spec.to_circuit(), spec.query("hit")
        ) == pytest.approx(0.9, abs=1e-12)
        spec = dsl.parse_file(GOLDEN / "10_detector_ancilla.qexp")
        assert circuits.evaluate(
            spec.to_circuit(), spec.query("hit")
        ) == pytest.approx(0.75, abs=1e-12)
