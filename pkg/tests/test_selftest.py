"""Unit tests for the self-test property suite."""

import numpy as np
import pytest

from moment_perturb.algebra import StatePoint
from moment_perturb.bundled import identity_pair_model
from moment_perturb.perturb import perturb_to_zero
from moment_perturb.selftest import (
    CheckResult,
    SelftestOutcome,
    check_cubic_decay,
    check_destabilization,
    check_scaling_law,
    check_tamper_detection,
    mutate_certificate,
    run_selftest,
)
from moment_perturb.serialization import (
    audit_certificate,
    certificate_digest_ok,
    certificate_to_dict,
)


@pytest.fixture(scope="module")
def record() -> dict:
    model = identity_pair_model()
    return certificate_to_dict(perturb_to_zero(model, StatePoint([2.0, 1.0]), 1.0), model)


# --- tamper detection ---


class TestMutateCertificate:
    def test_sealed_mutation_breaks_digest(self, record):
        rng = np.random.default_rng(0)
        for _ in range(20):
            mutated, name = mutate_certificate(record, rng, reseal=False)
            assert mutated[name] != record[name]
            assert not certificate_digest_ok(mutated)

    def test_resealed_mutation_is_caught_semantically(self, record):
        rng = np.random.default_rng(1)
        for _ in range(20):
            mutated, name = mutate_certificate(record, rng, reseal=True)
            assert certificate_digest_ok(mutated)
            assert audit_certificate(mutated), name

    def test_original_untouched(self, record):
        before = dict(record)
        mutate_certificate(record, np.random.default_rng(2), reseal=True)
        assert record == before

    def test_check_needs_records(self):
        passed, detail = check_tamper_detection(np.random.default_rng(0), ([], []))
        assert not passed
        assert detail["reason"] == "no certificates to mutate"

    def test_check_on_one_record(self, record):
        passed, detail = check_tamper_detection(np.random.default_rng(3), ([record], []))
        assert passed, detail["accepted"]


# --- individual checks ---


class TestChecks:
    def test_destabilization(self):
        passed, detail = check_destabilization(np.random.default_rng(0))
        assert passed
        assert detail["dim_jump"] == [0, 1]

    def test_cubic_decay(self):
        passed, detail = check_cubic_decay(np.random.default_rng(0))
        assert passed, detail
        assert detail["min_slope"] >= 2.9

    def test_scaling_law(self):
        passed, detail = check_scaling_law(np.random.default_rng(0))
        assert passed, detail


class TestSelftestOutcome:
    def test_summary(self):
        outcome = SelftestOutcome(
            [CheckResult("a", True, {}, 0.1), CheckResult("b", False, {"x": 1}, 0.2)]
        )
        assert not outcome.ok
        assert outcome.failed() == ["b"]
        assert outcome.to_dict() == {
            "kind": "selftest",
            "ok": False,
            "checks": [
                {"name": "a", "passed": True, "detail": {}},
                {"name": "b", "passed": False, "detail": {"x": 1}},
            ],
        }

    def test_empty_outcome_is_ok(self):
        assert SelftestOutcome().ok


def test_full_suite_passes():
    outcome = run_selftest(0)
    assert outcome.ok, outcome.failed()
    assert len(outcome.checks) == 10
