import pytest
import yaml

from ctipon.scenario import (
    BACKGROUND_TCONT_BASE,
    ScenarioError,
    explain_defaults,
    load_scenario,
    resolve,
)
from ctipon.simcore import MS, US

MINIMAL = {"onus": [{"id": 0}], "ues": [{"id": 0, "onu": 0, "tcont": 1}]}


def errors_of(raw):
    with pytest.raises(ScenarioError) as exc:
        resolve(raw)
    return exc.value.errors


def test_minimal_scenario_gets_all_defaults():
    cfg = resolve(MINIMAL)
    assert cfg.scenario_id == "scenario"
    assert cfg.duration == 1000 * MS
    assert cfg.mode == "cti"
    assert cfg.slot.prbs_total == 51
    assert cfg.slot.k2 == 4
    assert cfg.pon.capacity_bytes == 155_520
    assert cfg.cti_timing.lead_time == 250 * US
    assert cfg.cti_drop_rate == 0.0
    assert cfg.telemetry_window == 100 * MS
    assert cfg.onus[0].fiber_km == 10.0
    assert cfg.ues[0].mcs == 3
    assert cfg.ues[0].profile.kind == "constant-rate"


def test_partial_override_keeps_sibling_defaults():
    raw = dict(MINIMAL, slot={"prbs_total": 106})
    cfg = resolve(raw)
    assert cfg.slot.prbs_total == 106
    assert cfg.slot.k2 == 4  # untouched sibling default


def test_mappings_derived():
    raw = {
        "onus": [{"id": 0, "background": {"mean_rate_mbps": 5}}, {"id": 1}],
        "ues": [{"id": 0, "onu": 0, "tcont": 1}, {"id": 1, "onu": 1, "tcont": 2}],
    }
    cfg = resolve(raw)
    assert cfg.ue_to_tcont == {0: 1, 1: 2}
    assert cfg.fronthaul_tconts == {1, 2}
    assert cfg.tcont_to_onu == {1: 0, 2: 1, BACKGROUND_TCONT_BASE: 0}
    assert cfg.onus[0].background is not None
    assert cfg.onus[1].background is None


def test_all_errors_reported_not_just_first():
    raw = {
        "bogus_key": 1,
        "duration_ms": -5,
        "mode": "magic",
        "onus": [{"id": 0}, {"id": 0}],
        "ues": [
            {"id": 0, "onu": 7, "tcont": 1, "mcs": 99},
            {"id": 0, "onu": 0, "tcont": 9001},
        ],
    }
    errors = errors_of(raw)
    joined = "\n".join(errors)
    assert len(errors) >= 6
    assert "bogus_key" in joined
    assert "duration_ms" in joined
    assert "mode" in joined
    assert "duplicate onu id" in joined
    assert "unknown onu 7" in joined
    assert "unknown mcs" in joined
    assert "duplicate ue id" in joined
    assert "reserved" in joined


def test_empty_document_rejected():
    errors = errors_of({})
    assert any("onu" in e for e in errors)
    assert any("ue" in e for e in errors)


def test_tcont_cannot_belong_to_two_onus():
    raw = {
        "onus": [{"id": 0}, {"id": 1}],
        "ues": [{"id": 0, "onu": 0, "tcont": 1}, {"id": 1, "onu": 1, "tcont": 1}],
    }
    assert any("already belongs" in e for e in errors_of(raw))


def test_profile_validation_propagates():
    raw = dict(MINIMAL, ues=[{"id": 0, "onu": 0, "tcont": 1,
                              "profile": {"kind": "nope", "mean_rate_mbps": -1}}])
    errors = errors_of(raw)
    assert any("ues[0].profile" in e and "kind" in e for e in errors)
    assert any("mean_rate" in e for e in errors)


def test_scenario_hash_stable_and_sensitive():
    a = resolve(MINIMAL).scenario_hash()
    b = resolve(MINIMAL).scenario_hash()
    c = resolve(dict(MINIMAL, seed=2)).scenario_hash()
    assert a == b
    assert a != c
    assert len(a) == 64


def test_hash_of_explicit_defaults_matches_implicit():
    explicit = dict(MINIMAL, seed=1, mode="cti", duration_ms=1000)
    assert resolve(MINIMAL).scenario_hash() == resolve(explicit).scenario_hash()


def test_load_scenario_file(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(dict(MINIMAL, id="filetest", seed=9)))
    cfg = load_scenario(path)
    assert cfg.scenario_id == "filetest"
    assert cfg.seed == 9


def test_load_scenario_missing_file():
    with pytest.raises(ScenarioError) as exc:
        load_scenario("/nonexistent/path.yaml")
    assert "cannot read" in exc.value.errors[0]


def test_load_scenario_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("{unclosed: [")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(path)
    assert "parse error" in exc.value.errors[0]


def test_shipped_scenarios_resolve():
    for name in ("default", "residual", "saturated", "minimal"):
        cfg = load_scenario(f"scenarios/{name}.yaml")
        assert cfg.scenario_id == name


def test_explain_defaults_is_valid_scenario():
    doc = yaml.safe_load(explain_defaults())
    cfg = resolve(doc)
    assert cfg.slot.prbs_total == 51
    assert cfg.onus[0].background is not None
