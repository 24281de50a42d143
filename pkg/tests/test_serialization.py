"""Unit tests for spec files, canonical JSON, certificate records and reports."""

import copy
import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from moment_perturb.algebra import OneParameterSubgroup, StatePoint
from moment_perturb.bundled import identity_pair_model, quadratic_torus_model, su2_pair_model
from moment_perturb.const import DEFAULT_RANK_TOL, OPT_MAX_ITER, TOL_RANK, TOL_ZERO
from moment_perturb.exceptions import NoLimit, SchemaMismatch, SpecParseError
from moment_perturb.moment import slice_moment
from moment_perturb.perturb import perturb_to_zero
from moment_perturb.serialization import (
    Report,
    audit_certificate,
    canonical_json_bytes,
    certificate_digest_ok,
    certificate_from_dict,
    certificate_to_dict,
    content_digest,
    decode_rho,
    encode_rho,
    error_to_dict,
    jsonable,
    load_report,
    load_spec,
    model_from_record,
    model_record,
    parse_spec,
    spec_from_dict,
)
from moment_perturb.spec_schema import validate_certificate, with_overrides

SPECS = Path(__file__).resolve().parent.parent / "specs"
SPEC_FILES = sorted(SPECS.glob("*.json"))


def minimal_spec(**overrides) -> dict:
    spec = {
        "schema_version": 1,
        "group": {"type": "torus"},
        "representation": {"weights": [[1, -1]]},
        "points": {"p": [[2, 0], [1, 0]]},
    }
    spec.update(overrides)
    return spec


@pytest.fixture(scope="module")
def issued_record() -> dict:
    model = identity_pair_model()
    cert = perturb_to_zero(model, StatePoint([2.0, 1.0]), 1.0)
    return certificate_to_dict(cert, model)


# --- canonical JSON ---


class TestCanonicalJson:
    def test_sorted_indented_with_newline(self):
        assert canonical_json_bytes({"b": 1, "a": [1, 2]}) == (
            b'{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'
        )

    def test_digest_ignores_key_order(self):
        assert content_digest({"a": 1, "b": 2}) == content_digest({"b": 2, "a": 1})
        assert len(content_digest({})) == 64

    def test_jsonable(self):
        data = {
            "array": np.array([1, 2]),
            "fraction": Fraction(-1, 3),
            "complex": 1 + 2j,
            "tuple": (np.float64(0.5), np.int64(3)),
            "flag": np.bool_(True),
        }
        assert jsonable(data) == {
            "array": [1, 2],
            "fraction": "-1/3",
            "complex": [1.0, 2.0],
            "tuple": [0.5, 3],
            "flag": True,
        }

    def test_rho_round_trip(self):
        rho = OneParameterSubgroup((Fraction(1, 2), -1), lattice=False)
        assert encode_rho(rho) == {"xi": ["1/2", "-1/1"], "lattice": False}
        assert decode_rho(encode_rho(rho)) == rho
        assert encode_rho(None) is None


# --- spec files ---


class TestSpecFiles:
    @pytest.mark.parametrize("path", SPEC_FILES, ids=lambda p: p.name)
    def test_bundled_specs_load(self, path):
        spec = load_spec(path)
        assert spec.points
        assert len(spec.digest) == 64

    @pytest.mark.parametrize("path", SPEC_FILES, ids=lambda p: p.name)
    def test_canonical_form_is_stable(self, path):
        spec = load_spec(path)
        again = parse_spec(spec.to_bytes())
        assert again.to_bytes() == spec.to_bytes()
        assert again.digest == spec.digest

    def test_pair_spec_contents(self):
        spec = load_spec(SPECS / "pair.json")
        assert spec.action.is_torus
        assert spec.point("polystable").coords == pytest.approx([2.0, 1.0])
        model = spec.model("quadratic")
        assert model.params == {"epsilon": 0.5 + 0j}
        assert model.ball_radius == 10.0
        assert spec.seed == 0

    def test_su2_spec_tolerances(self):
        spec = load_spec(SPECS / "su2.json")
        assert not spec.action.is_torus
        assert spec.tolerances[OPT_MAX_ITER] == 4000
        assert spec.tolerances[TOL_RANK] == DEFAULT_RANK_TOL

    def test_unknown_names(self):
        spec = load_spec(SPECS / "pair.json")
        with pytest.raises(SpecParseError):
            spec.point("nowhere")
        with pytest.raises(SpecParseError):
            spec.model("nothing")

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecParseError):
            load_spec(tmp_path / "absent.json")

    def test_invalid_json(self):
        with pytest.raises(SpecParseError):
            parse_spec("{not json")

    def test_wrong_schema_version(self):
        with pytest.raises(SchemaMismatch):
            spec_from_dict(minimal_spec(schema_version=2))

    def test_missing_group(self):
        data = minimal_spec()
        del data["group"]
        with pytest.raises(SpecParseError) as excinfo:
            spec_from_dict(data)
        assert excinfo.value.exit_code == 4

    def test_weights_and_matrices_are_exclusive(self):
        data = minimal_spec(
            representation={"weights": [[1, -1]], "matrices": [[[[0, 1]]]]},
        )
        with pytest.raises(SpecParseError):
            spec_from_dict(data)

    def test_point_dimension_checked(self):
        with pytest.raises(SpecParseError):
            spec_from_dict(minimal_spec(points={"p": [[1, 0], [1, 0], [1, 0]]}))

    def test_dependent_weights_act_with_a_kernel(self):
        spec = spec_from_dict(minimal_spec(representation={"weights": [[1, -1], [2, -2]]}))
        assert spec.action.dim == 2
        assert spec.action.trivial_dim == 1

    def test_matrix_group_needs_generators(self):
        data = minimal_spec(
            group={"type": "matrix"},
            representation={"matrices": [[[[0, 1]]]]},
            points={},
        )
        with pytest.raises(SpecParseError):
            spec_from_dict(data)

    def test_non_equivariant_model_rejected(self):
        data = minimal_spec(
            models={
                "bad": {
                    "outer": {"weights": [[1, -1, 2]]},
                    "phi": [
                        [{"coeff": [1, 0], "powers": [1, 0]}],
                        [{"coeff": [1, 0], "powers": [0, 1]}],
                        [{"coeff": [1, 0], "powers": [1, 1]}],
                    ],
                }
            }
        )
        with pytest.raises(SpecParseError) as excinfo:
            spec_from_dict(data)
        assert excinfo.value.diagnostics["cause"] == "NonEquivariantModel"

    def test_unknown_tolerance_rejected(self):
        with pytest.raises(SpecParseError):
            spec_from_dict(minimal_spec(tolerances={"bogus": 1.0}))

    def test_negative_tolerance_rejected(self):
        with pytest.raises(SpecParseError):
            spec_from_dict(minimal_spec(tolerances={TOL_ZERO: -1.0}))


class TestOverrides:
    def test_precedence(self):
        merged = with_overrides({TOL_RANK: 1e-6}, {OPT_MAX_ITER: 10.0})
        assert merged[TOL_RANK] == 1e-6
        assert merged[OPT_MAX_ITER] == 10.0
        assert with_overrides({TOL_RANK: 1e-6}, {TOL_RANK: 1e-4})[TOL_RANK] == 1e-4

    def test_unknown_override(self):
        with pytest.raises(SpecParseError):
            with_overrides({}, {"nonsense": 1.0})


# --- model records ---


class TestModelRecords:
    @pytest.mark.parametrize(
        "factory", [identity_pair_model, quadratic_torus_model, su2_pair_model]
    )
    def test_rebuilt_model_agrees(self, factory, rng):
        model = factory()
        rebuilt = model_from_record(json.loads(canonical_json_bytes(model_record(model))))
        x = StatePoint(0.3 * (rng.standard_normal(model.phi.n_in) + 1j))
        assert slice_moment(rebuilt, x).coeffs == pytest.approx(
            slice_moment(model, x).coeffs, abs=1e-14
        )
        assert rebuilt.form_scale == model.form_scale

    def test_parameters_are_folded_in(self):
        record = model_record(quadratic_torus_model(0.5))
        assert record["model"]["params"] == {}
        assert record["model"]["phi"][2] == [{"coeff": [0.5, 0.0], "powers": [2, 0]}]

    def test_malformed_record(self):
        with pytest.raises(SchemaMismatch):
            model_from_record({"name": "broken"})


# --- certificates ---


class TestCertificateRecords:
    def test_record_is_sealed(self, issued_record):
        assert certificate_digest_ok(issued_record)
        assert validate_certificate(issued_record)["kind"] == "zero_certificate"

    def test_record_survives_json(self, issued_record):
        reloaded = json.loads(canonical_json_bytes(issued_record))
        assert certificate_digest_ok(reloaded)
        assert audit_certificate(reloaded) == []

    def test_from_dict(self, issued_record):
        cert, model = certificate_from_dict(issued_record)
        assert cert.eta_norm == issued_record["eta_norm"]
        assert cert.lambda_samples == issued_record["lambda_recipe"]["samples"]
        assert model.inner_action.is_torus

    def test_broken_seal(self, issued_record):
        forged = copy.deepcopy(issued_record)
        forged["iterations"] += 1
        assert audit_certificate(forged) == ["digest"]

    def test_resealed_forgery(self, issued_record):
        forged = copy.deepcopy(issued_record)
        forged["y"][0][0] += 1e-3
        del forged["digest"]
        forged["digest"] = content_digest(forged)
        failures = audit_certificate(forged)
        assert "digest" not in failures
        assert "y" in failures

    def test_resealed_lambda(self, issued_record):
        forged = copy.deepcopy(issued_record)
        forged["lambda_used"] *= 0.5
        del forged["digest"]
        forged["digest"] = content_digest(forged)
        assert "lambda" in audit_certificate(forged)

    def test_unreadable_record(self, issued_record):
        forged = copy.deepcopy(issued_record)
        del forged["x0"]
        assert audit_certificate(forged) == ["digest", "schema"]


# --- reports ---


class TestReport:
    def test_certificates_include_nested(self, issued_record):
        report = Report(spec_digest=None)
        report.add("perturb identity p", issued_record)
        report.add("scan identity p", {"kind": "scaling", "certificate": issued_record})
        report.add("classify p", {"kind": "stability"})
        assert len(report.certificates()) == 2

    def test_round_trip(self, tmp_path, issued_record):
        report = Report(spec_digest="abc", tolerances=with_overrides({}), seed=3)
        report.add("perturb identity p", issued_record)
        report.timings["perturb identity p"] = 0.25
        path = tmp_path / "report.json"
        path.write_bytes(report.to_bytes())
        loaded = load_report(path)
        assert loaded.to_bytes() == report.to_bytes()
        assert loaded.results[0]["label"] == "perturb identity p"

    def test_timings_can_be_left_out(self):
        report = Report(spec_digest=None)
        report.timings["x"] = 1.0
        assert "timings" not in report.to_dict(include_timings=False)
        assert "timings" in report.to_dict()

    def test_not_a_report(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text(json.dumps({"hello": "world"}))
        with pytest.raises(SchemaMismatch):
            load_report(path)

    def test_wrong_report_version(self, tmp_path):
        report = Report(spec_digest=None).to_dict()
        report["schema_version"] = 99
        path = tmp_path / "report.json"
        path.write_text(json.dumps(report))
        with pytest.raises(SchemaMismatch):
            load_report(path)

    def test_error_record(self):
        record = error_to_dict(NoLimit("diverges", rho=["1/1"]))
        assert record == {
            "kind": "error",
            "error": "NoLimit",
            "message": "diverges",
            "exit_code": 3,
            "diagnostics": {"rho": ["1/1"]},
        }
