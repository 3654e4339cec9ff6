from dataclasses import replace

import numpy as np
import pytest

from app.config import RunConfig
from app.errors import ArtifactError, InvalidInputError, UnsupportedComassError
from app.forge.dumps import sidecar_path
from app.geometry.comass import ComassMethod
from app.geometry.multilinear import AltForm, MetricPoint, random_form
from app.models import ComassMode
from app.services import ComassService, ForgeService, LemmaService, TrialService
from app.services.envelope import input_hash, wrap
from app.services.lemma_service import SUITES


def _straight(**overrides):
    values = {"model": "straight2d", "resolution": 64, "curve_samples": 1024, "competitors": 8}
    values.update(overrides)
    return RunConfig(**values)


# ==================== 信封 ====================

def test_input_hash_is_canonical():
    a = input_hash("forge", {"b": 1, "a": [1, 2]})
    b = input_hash("forge", {"a": [1, 2], "b": 1})
    assert a == b
    assert len(a) == 64
    assert input_hash("minimize", {"a": [1, 2], "b": 1}) != a


def test_wrap_hashes_config_and_inputs():
    plain = wrap("comass", {"seed": 0}, {"lower": 1.0})
    with_form = wrap("comass", {"seed": 0}, {"lower": 1.0}, {"form": {"n": 3}})
    assert plain.command == "comass"
    assert plain.report == {"lower": 1.0}
    assert plain.input_hash != with_form.input_hash


# ==================== comass ====================

def test_comass_service_exact():
    payload = ComassService.estimate(AltForm.axis(4, [1, 2], 3.0), method=ComassMode.EXACT)
    assert payload.lower == pytest.approx(3.0)
    assert payload.method is ComassMethod.EXACT
    assert len(payload.witness) == 2


def test_comass_service_exact_unsupported():
    with pytest.raises(UnsupportedComassError):
        ComassService.estimate(random_form(6, 3, 0), method=ComassMode.EXACT)


def test_comass_service_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        ComassService.estimate(AltForm.axis(4, [1]), MetricPoint.identity(3))


def test_comass_service_bruteforce_brackets():
    phi = random_form(5, 2, 1)
    exact = ComassService.estimate(phi, method=ComassMode.EXACT).lower
    sampled = ComassService.estimate(phi, method=ComassMode.BRUTEFORCE, samples=2000, seed=4)
    assert sampled.lower <= exact + 1e-12
    assert sampled.evals == 2000


# ==================== 引理套件 ====================

def test_suite_names():
    assert LemmaService.suite_names() == [
        "L3.1", "L3.2", "L3.3", "L3.4", "L3.15", "L3.16", "L3.17", "L4.1", "L4.2",
    ]


def test_unknown_suite():
    with pytest.raises(InvalidInputError):
        LemmaService.run("L9.9")


@pytest.mark.parametrize("suite", ["L3.1", "L3.2", "L3.3", "L3.17", "L4.1"])
def test_exact_suites_pass(suite):
    report = LemmaService.run(suite, trials=20, seed=1)
    assert report.passed
    result = report.suites[0]
    assert result.suite == suite
    assert result.trials == 20
    assert result.worst_margin >= 0
    assert not result.failures


def test_scaling_suite_covers_ascent():
    report = LemmaService.run("L3.1", trials=5, seed=4)
    worst = report.suites[0].details["worst"]
    assert set(worst) == {"relative_error", "ascent_relative_error"}
    assert worst["ascent_relative_error"] <= 1e-6
    assert report.passed


def test_monotone_suite_bounds_ratios_by_upper():
    report = LemmaService.run("L3.2", trials=10, seed=5)
    details = report.suites[0].details
    assert "ratio_above_upper" in details["worst"]
    assert details["worst"]["ratio_above_upper"] <= 1e-9
    assert report.passed


@pytest.mark.parametrize("suite", ["L3.15", "L3.16", "L4.2"])
def test_ascent_suites_pass(suite):
    report = LemmaService.run(suite, trials=3, seed=2)
    assert report.passed, report.suites[0].failures


def test_bundle_suite_is_fixed():
    report = LemmaService.run("L3.4", trials=3)
    assert report.passed
    assert report.suites[0].trials == 8000


def test_ascent_suite_trials_are_capped(monkeypatch):
    cheap = replace(SUITES["L3.15"], runner=lambda seed: [("noop", 0.0, 1.0)])
    monkeypatch.setitem(SUITES, "L3.15", cheap)
    report = LemmaService.run("L3.15", trials=5000)
    assert report.suites[0].trials == 100
    assert report.passed


def test_lemma_results_independent_of_workers():
    one = LemmaService.run("L3.3", trials=16, seed=7, workers=1)
    many = LemmaService.run("L3.3", trials=16, seed=7, workers=4)
    assert one.to_json_dict() == many.to_json_dict()


@pytest.mark.slow
def test_suite_seed_does_not_depend_on_selection():
    alone = LemmaService.run("L3.2", trials=10, seed=3)
    together = LemmaService.run("all", trials=10, seed=3)
    picked = next(s for s in together.suites if s.suite == "L3.2")
    assert picked.details == alone.suites[0].details


# ==================== 锻造与试验 ====================

def test_forge_straight_model():
    envelope, passed = ForgeService.run(_straight())
    assert passed
    assert envelope.command == "forge"
    assert envelope.report["pass"] is True
    assert envelope.config["resolution"] == 64
    assert "threads" not in envelope.config


def test_rho_corruption_needs_single_curve():
    with pytest.raises(InvalidInputError):
        ForgeService.forge(RunConfig(model="twocircle3d", corrupt="rho"))


def test_minimize_straight_model():
    envelope, passed = TrialService.run(_straight())
    assert passed
    report = envelope.report
    assert report["pass"] is True
    assert report["competitors"] == 8
    assert report["extra"]["flat_length_M"] == pytest.approx(1.0)
    assert report["extra"]["straight"] == pytest.approx(report["mass_M"], rel=1e-6)


def test_minimize_with_shrunken_metric_fails():
    envelope, passed = TrialService.run(_straight(corrupt="metric"))
    assert not passed
    kinds = [(v["competitor"], v["kind"]) for v in envelope.report["lower_bound_violations"]]
    assert (-1, "lower_bound") in kinds


def test_minimize_from_dumped_fields(tmp_path):
    path = tmp_path / "straight.bin"
    _, passed = ForgeService.run(_straight(dump_fields=str(path)))
    assert passed
    assert sidecar_path(path).is_file()

    envelope, passed = TrialService.run(_straight(fields=str(path), model="wavy2d"))
    assert passed
    assert envelope.report["mass_M"] == pytest.approx(1.0, abs=1e-6)
    assert envelope.input_hash != TrialService.run(_straight())[0].input_hash


def test_artifact_missing_field(tmp_path):
    path = tmp_path / "straight.bin"
    ForgeService.run(_straight(dump_fields=str(path)))
    meta = sidecar_path(path).read_text(encoding="utf-8").replace('"name": "Phi"', '"name": "Psi"')
    sidecar_path(path).write_text(meta, encoding="utf-8")
    with pytest.raises(ArtifactError):
        TrialService.load_artifact(str(path))


def test_artifact_with_bad_config(tmp_path):
    path = tmp_path / "straight.bin"
    ForgeService.run(_straight(dump_fields=str(path)))
    meta = sidecar_path(path).read_text(encoding="utf-8").replace('"straight2d"', '"hexagon"')
    sidecar_path(path).write_text(meta, encoding="utf-8")
    with pytest.raises(ArtifactError):
        TrialService.load_artifact(str(path))


def test_loaded_metric_matches_forge(tmp_path):
    path = tmp_path / "straight.bin"
    ForgeService.run(_straight(dump_fields=str(path)))
    forged, outcome, meta = TrialService.load_artifact(str(path))
    direct = ForgeService.forge(_straight())
    assert forged.model.value == "straight2d"
    assert meta["resolution"] == 64
    np.testing.assert_array_equal(outcome.metric.values, direct.metric.values)
    assert outcome.passed
