"""Command line behavior: exit codes, canonical output, config files."""

import json
from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from okkit.cli import _hull_2d, body_svg, canonical_json, main
from okkit.catalog import load_example


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


# ---------------------------------------------------------------------------
# canonical serialization


class TestCanonicalJson:
    def test_keys_sorted(self):
        assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_float_rendering(self):
        assert canonical_json(0.1) == "0.10000000000000001"
        assert canonical_json(1.0) == "1"
        assert canonical_json(-2.5e-300) == "-2.5e-300"

    def test_scalars(self):
        assert canonical_json([True, False, None, 7]) == "[true,false,null,7]"

    def test_fraction_becomes_pair(self):
        assert canonical_json(Fraction(3, 7)) == "[3,7]"

    def test_tuple_matches_list(self):
        assert canonical_json((1, 2)) == canonical_json([1, 2])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            canonical_json(float("nan"))

    def test_rejects_non_string_keys(self):
        with pytest.raises(ValueError):
            canonical_json({1: "x"})

    def test_round_trips_through_json(self):
        doc = {"x": [1.5, {"y": None}], "z": "text"}
        assert json.loads(canonical_json(doc)) == doc


class TestHull:
    def test_square_cycle(self):
        pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]
        hull = _hull_2d(pts)
        assert len(hull) == 4
        assert (0.5, 0.5) not in hull

    def test_collinear(self):
        hull = _hull_2d([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
        assert (0.0, 0.0) in hull and (2.0, 2.0) in hull


# ---------------------------------------------------------------------------
# body


class TestBody:
    def test_p1_json_exact(self, runner):
        result = invoke(runner, "body", "p1")
        assert result.exit_code == 0
        assert result.output.strip() == (
            '{"body":{"dim":1,"facets":[{"normal":[-1],"offset":[0,1]},'
            '{"normal":[1],"offset":[1,1]}],"vertices":[[[0,1]],[[1,1]]],'
            '"volume":[1,1]},"degree":1,"entry":"p1",'
            '"semigroup_generators":[[1,[0]],[1,[1]]]}'
        )

    def test_elliptic_values(self, runner):
        result = invoke(runner, "body", "elliptic")
        doc = json.loads(result.output)
        assert doc["degree"] == 3
        assert doc["body"]["vertices"] == [[[0, 1]], [[3, 1]]]
        assert doc["body"]["volume"] == [3, 1]

    def test_reruns_are_byte_identical(self, runner):
        first = invoke(runner, "body", "gl3-flag")
        second = invoke(runner, "body", "gl3-flag")
        assert first.output == second.output

    def test_json_file_matches_stdout(self, runner, tmp_path):
        target = tmp_path / "out.json"
        result = invoke(runner, "body", "p1xp1", "--json", str(target))
        assert target.read_text() == result.output

    def test_svg_segment_for_1d(self, runner, tmp_path):
        target = tmp_path / "body.svg"
        invoke(runner, "body", "elliptic", "--svg", str(target))
        text = target.read_text()
        assert "<svg" in text and "<line" in text

    def test_svg_polygon_for_2d(self, runner, tmp_path):
        target = tmp_path / "body.svg"
        invoke(runner, "body", "p1xp1", "--svg", str(target))
        assert "<polygon" in target.read_text()

    def test_svg_projection_for_3d(self, runner, tmp_path):
        target = tmp_path / "body.svg"
        invoke(runner, "body", "gl3-flag", "--svg", str(target))
        text = target.read_text()
        assert "<polygon" in text and "largest variance" in text

    def test_svg_deterministic(self, runner, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        invoke(runner, "body", "gl3-flag", "--svg", str(a))
        invoke(runner, "body", "gl3-flag", "--svg", str(b))
        assert a.read_text() == b.read_text()

    def test_unknown_entry_exits_2(self, runner):
        result = runner.invoke(main, ["body", "nonsense"])
        assert result.exit_code == 2
        assert "nonsense" in result.stderr

    def test_user_file_accepted(self, runner, tmp_path):
        import okkit.catalog as cat

        bundled = Path(cat.__file__).parent / "data" / "p1.json"
        copy = tmp_path / "mine.json"
        copy.write_text(bundled.read_text())
        result = invoke(runner, "body", str(copy))
        assert result.exit_code == 0
        assert json.loads(result.output)["entry"] == "p1"


class TestBodySvgUnits:
    def test_one_marker_per_vertex(self):
        body = load_example("p1").body
        picture = body_svg(body)
        assert picture.count("<circle") == 2


# ---------------------------------------------------------------------------
# degenerate


class TestDegenerate:
    def test_elliptic_family(self, runner):
        result = invoke(runner, "degenerate", "elliptic")
        doc = json.loads(result.output)
        assert doc["functional"] == [14, -2]
        assert doc["weights"] == [14, 12, 8]
        assert doc["family"] == ["x1_1^2*x1_3 - x1_2^3 - x1_3^3*tau^12"]
        assert doc["initial_forms"] == ["x1_1^2*x1_3 - x1_2^3"]

    def test_p1_has_no_relations(self, runner):
        result = invoke(runner, "degenerate", "p1")
        doc = json.loads(result.output)
        assert doc["relations"] == [] and doc["family"] == []

    def test_output_file(self, runner, tmp_path):
        target = tmp_path / "fam.json"
        result = invoke(runner, "degenerate", "gl3-flag", "--json", str(target))
        assert target.read_text() == result.output


# ---------------------------------------------------------------------------
# flow


class TestFlow:
    def test_p1_five_samples(self, runner, tmp_path):
        csv_path = tmp_path / "run.csv"
        diag_path = tmp_path / "diag.json"
        result = invoke(
            runner, "flow", "p1", "--samples", "5",
            "--csv", str(csv_path), "--diagnostics", str(diag_path),
        )
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["succeeded"] == 5 and doc["total"] == 5
        assert diag_path.read_text() == result.output
        header = csv_path.read_text().splitlines()[0]
        assert header == "sample_id,s,t_re,t_im,chart,residual,Impi,ReLinErr,F_1"

    def test_values_in_unit_interval(self, runner):
        result = invoke(runner, "flow", "p1", "--samples", "8", "--seed", "3")
        doc = json.loads(result.output)
        for sample in doc["samples"]:
            assert sample["ok"]
            assert -1e-6 <= sample["F"][0] <= 1 + 1e-6

    def test_deterministic(self, runner):
        first = invoke(runner, "flow", "p1xp1", "--samples", "3", "--seed", "11")
        second = invoke(runner, "flow", "p1xp1", "--samples", "3", "--seed", "11")
        assert first.output == second.output

    def test_sample_i_independent_of_count(self, runner):
        few = json.loads(invoke(runner, "flow", "p1", "--samples", "2").output)
        many = json.loads(invoke(runner, "flow", "p1", "--samples", "4").output)
        assert few["samples"][0]["F"] == many["samples"][0]["F"]
        assert few["samples"][1]["F"] == many["samples"][1]["F"]

    def test_zero_samples_is_usage_error(self, runner):
        result = runner.invoke(main, ["flow", "p1", "--samples", "0"])
        assert result.exit_code == 2

    def test_bad_window_is_usage_error(self, runner):
        result = runner.invoke(
            main, ["flow", "p1", "--epsilon", "0.1", "--delta", "0.5"]
        )
        assert result.exit_code == 2


# ---------------------------------------------------------------------------
# check


class TestCheck:
    def test_single_entry_passes(self, runner):
        result = invoke(runner, "check", "p1xp1")
        assert result.exit_code == 0
        assert "overall: PASS" in result.output
        assert "FAIL" not in result.output

    def test_extended_entry_skips_flow_probe(self, runner):
        result = invoke(runner, "check", "gl3-flag")
        assert result.exit_code == 0
        assert "SKIP" in result.output and "extended" in result.output

    def test_tampered_file_fails(self, runner, tmp_path):
        import okkit.catalog as cat

        doc = json.loads(
            (Path(cat.__file__).parent / "data" / "p1.json").read_text()
        )
        doc["expected"]["degree"] = 5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        result = runner.invoke(main, ["check", str(bad)])
        assert result.exit_code == 1
        assert "FAIL" in result.output


# ---------------------------------------------------------------------------
# slice


class TestSlice:
    def test_demo_entry(self, runner):
        result = invoke(runner, "slice", "elliptic-quotient-demo")
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["matrix"] == [[-1, 1]]
        assert doc["sliced_generators"] == [[1, [1]]]
        assert doc["sliced_body"]["vertices"] == [[[1, 1]]]
        assert doc["commutation_residual"] < 1e-6

    def test_zero_matrix_keeps_body(self, runner, tmp_path):
        hom = tmp_path / "zero.json"
        hom.write_text('{"matrix": [[0, 0, 0]]}')
        result = invoke(
            runner, "slice", "p1xp1", "--homomorphism", str(hom),
            "--samples", "10",
        )
        assert result.exit_code == 0
        doc = json.loads(result.output)
        full = json.loads(invoke(runner, "body", "p1xp1").output)
        assert doc["sliced_body"] == full["body"]
        assert doc["commutation_residual"] == 0.0

    def test_entry_without_grading_needs_flag(self, runner):
        result = runner.invoke(main, ["slice", "p1"])
        assert result.exit_code == 2
        assert "homomorphism" in result.stderr

    def test_wrong_matrix_width_rejected(self, runner, tmp_path):
        hom = tmp_path / "wide.json"
        hom.write_text('{"matrix": [[1, 2, 3, 4]]}')
        result = runner.invoke(main, ["slice", "p1", "--homomorphism", str(hom)])
        assert result.exit_code == 2

    def test_malformed_homomorphism_file(self, runner, tmp_path):
        hom = tmp_path / "junk.json"
        hom.write_text('{"rows": 3}')
        result = runner.invoke(main, ["slice", "p1", "--homomorphism", str(hom)])
        assert result.exit_code == 2


# ---------------------------------------------------------------------------
# config files


class TestConfig:
    def test_defaults_applied(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("# comment line\nsamples = 3\nseed = 11\n\n")
        result = invoke(runner, "--config", str(cfg), "flow", "p1xp1")
        doc = json.loads(result.output)
        assert doc["total"] == 3
        direct = invoke(
            runner, "flow", "p1xp1", "--samples", "3", "--seed", "11"
        )
        assert result.output == direct.output

    def test_flag_beats_config(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("samples = 3\n")
        result = invoke(
            runner, "--config", str(cfg), "flow", "p1", "--samples", "2"
        )
        assert json.loads(result.output)["total"] == 2

    def test_unknown_key_rejected(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("volume = 9\n")
        result = runner.invoke(main, ["--config", str(cfg), "body", "p1"])
        assert result.exit_code == 2
        assert "unknown key" in result.stderr

    def test_missing_equals_rejected(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("samples 3\n")
        result = runner.invoke(main, ["--config", str(cfg), "body", "p1"])
        assert result.exit_code == 2

    def test_bad_value_rejected(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("samples = soon\n")
        result = runner.invoke(main, ["--config", str(cfg), "body", "p1"])
        assert result.exit_code == 2

    def test_zero_config_samples_rejected(self, runner, tmp_path):
        cfg = tmp_path / "okkit.cfg"
        cfg.write_text("samples = 0\n")
        result = runner.invoke(main, ["--config", str(cfg), "flow", "p1"])
        assert result.exit_code == 2
