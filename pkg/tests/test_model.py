import copy
import json
import math

import pytest

from igesdse import matpower
from igesdse.errors import ParseError, ValidationError
from igesdse.model import (GtuCoupling, Pipeline, load_model, model_from_dict, save_model,
                           to_dict, validate)
from conftest import DATA


def three_dict():
    return json.loads((DATA / "threenode.json").read_text())


def codes(exc_info):
    return {i.code for i in exc_info.value.issues}


def test_three_node_fixture(three_node):
    assert three_node.gas.n_nodes == 3
    assert three_node.gas.n_pipes == 2
    assert three_node.gas.sources == [1]
    assert validate(three_node) == []


def test_iges_fixture(iges):
    assert iges.gas.n_nodes == 30
    assert iges.grid.n_buses == 39
    assert sorted((g.bus, g.gas_sink) for g in iges.gtus) == [(32, 16), (36, 17)]
    assert validate(iges) == []


def test_cross_section():
    p = Pipeline(1, 2, 1000.0, 0.7)
    assert p.cross_section == pytest.approx(math.pi * 0.49 / 4, rel=1e-12)


def test_duplicate_node_id():
    d = three_dict()
    d["gas_network"]["nodes"][2]["id"] = 2
    with pytest.raises(ValidationError) as exc:
        model_from_dict(d)
    assert "DuplicateNodeId" in codes(exc)


def test_pipeline_orientation():
    d = three_dict()
    d["gas_network"]["pipelines"][1].update({"from": 3, "to": 2})
    with pytest.raises(ValidationError) as exc:
        model_from_dict(d)
    assert "PipelineOrientation" in codes(exc)


def test_gtu_on_source(three_node):
    from dataclasses import replace
    bad = replace(three_node, gtus=(GtuCoupling(2, 1, 20.148),))
    assert [i.code for i in validate(bad)] == ["GtuSinkNotSink"]


def test_field_level_messages():
    d = three_dict()
    d["scenario"]["smoothing"]["alpha"] = 1.5
    d["gas_network"]["nodes"][0]["pressure_bar"] = -1.0
    with pytest.raises(ValidationError) as exc:
        model_from_dict(d)
    assert {"SmoothingRange", "SourceDensity"} <= codes(exc)
    assert "scenario.smoothing" in str(exc.value)


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_model(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        load_model(tmp_path / "bad.json")
    d = three_dict()
    del d["gas_network"]["pipelines"][0]["length"]
    with pytest.raises(ParseError, match="length"):
        model_from_dict(d)


def test_disconnected_and_slack():
    d = three_dict()
    d["gas_network"]["pipelines"].pop()
    d["power_grid"]["buses"][1]["kind"] = "slack"
    with pytest.raises(ValidationError) as exc:
        model_from_dict(d)
    assert {"Disconnected", "SlackCount"} <= codes(exc)


def test_sparse_ids_are_canonicalized():
    d = three_dict()
    remap = {1: 10, 2: 20, 3: 30}
    for n in d["gas_network"]["nodes"]:
        n["id"] = remap[n["id"]]
    for p in d["gas_network"]["pipelines"]:
        p["from"], p["to"] = remap[p["from"]], remap[p["to"]]
    d["gtus"][0]["gas_sink"] = 30
    d["scenario"]["gas_loads"] = {"20": 2.0}
    m = model_from_dict(d)
    assert [n.id for n in m.gas.nodes] == [1, 2, 3]
    assert [n.label for n in m.gas.nodes] == ["10", "20", "30"]
    assert m.gtus[0].gas_sink == 3
    assert m.scenario.gas_loads == ((2, 2.0),)


def test_segments_insert_passive_nodes():
    d = three_dict()
    d["gas_network"]["pipelines"][1]["segments"] = 3
    m = model_from_dict(d)
    assert m.gas.n_nodes == 5 and m.gas.n_pipes == 4
    assert sum(p.length for p in m.gas.pipelines) == pytest.approx(25000.0)
    assert all(p.from_node < p.to_node for p in m.gas.pipelines)


@pytest.mark.parametrize("name", ["threenode.json", "iges30_39.json"])
def test_round_trip(name, tmp_path):
    m = load_model(DATA / name)
    save_model(m, tmp_path / "copy.json")
    assert load_model(tmp_path / "copy.json") == m
    assert model_from_dict(copy.deepcopy(to_dict(m))) == m


def test_matpower_case39():
    tables = matpower.read_tables(DATA / "case39.m")
    assert tables["baseMVA"] == 100.0
    assert len(tables["bus"]) == 39 and len(tables["branch"]) == 46
    grid = matpower.load_case(DATA / "case39.m")
    assert grid.n_buses == 39 and grid.slack == 31
    assert len(grid.generators) == 10


def test_matpower_rejects_phase_shifter(tmp_path):
    text = (DATA / "case39.m").read_text()
    lines = text.splitlines()
    k = next(i for i, line in enumerate(lines) if "mpc.branch" in line) + 1
    cols = lines[k].split()
    cols[9] = "5"
    lines[k] = "\t".join(cols)
    (tmp_path / "c.m").write_text("\n".join(lines))
    with pytest.raises(ParseError):
        matpower.load_case(tmp_path / "c.m")
