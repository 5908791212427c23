import json
import re
from pathlib import Path

import numpy as np
import pytest

from percolab.clusters import boundary_curve_of_sites
from percolab.flows import Necklet
from percolab.io import (
    dump_json,
    format_configuration,
    parse_configuration,
    read_configuration,
    report_schema,
    sidecar_path,
    validate_report,
    write_configuration,
    write_csv,
)
from percolab.lattice import Box, Circuit, Configuration, Kind
from percolab.render import render_svg, svg_document

DATA = Path(__file__).parent / "data"
RING8 = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def test_text_format_layout():
    cfg = Configuration.from_sites(Box(1), [(-1, -1), (1, 1)])
    assert format_configuration(cfg) == "3 3\n100\n000\n001\n"


def test_configuration_round_trip(tmp_path, rng):
    for k in range(20):
        box = Box(int(rng.integers(0, 6)), tuple(int(v) for v in rng.integers(-5, 6, 2)))
        cfg = Configuration(box, rng.random((box.side, box.side)) < 0.5)
        path = write_configuration(cfg, tmp_path / f"c{k}.txt", seed=k, sampler="bernoulli(p=0.5)")
        back, header = read_configuration(path)
        assert back == cfg and back.window == box
        assert header["seed"] == k and header["sampler"] == "bernoulli(p=0.5)"
        assert json.loads(sidecar_path(path).read_text())["center"] == list(box.center)


def test_reading_without_sidecar(tmp_path):
    path = tmp_path / "bare.txt"
    path.write_text("1 1\n1\n")
    cfg, header = read_configuration(path)
    assert header == {} and cfg[(0, 0)] == 1


@pytest.mark.parametrize("text", ["", "3\n000\n000\n000\n", "2 2\n00\n00\n", "3 3\n000\n020\n000\n",
                                  "3 3\n000\n000\n", "3 5\n000\n000\n000\n000\n000\n"])
def test_malformed_text_is_rejected(text):
    with pytest.raises(ValueError):
        parse_configuration(text)


def test_sidecar_mismatch(tmp_path):
    path = write_configuration(Configuration.constant(Box(1), 0), tmp_path / "m.txt")
    sidecar_path(path).write_text(json.dumps({"half_width": 4}))
    with pytest.raises(ValueError):
        read_configuration(path)


def test_csv_and_json_writers(tmp_path):
    rows = [{"a": 1, "b": 0.1, "c": True}, {"a": 2, "b": None, "c": False}]
    text = write_csv(rows, tmp_path / "t.csv").read_text()
    assert text == "a,b,c\n1,0.1,1\n2,,0\n"
    doc = json.loads(dump_json({"z": 1, "a": [1, 2]}, tmp_path / "t.json").read_text())
    assert doc == {"z": 1, "a": [1, 2]}


def test_schema_accepts_minimal_report_and_rejects_extras():
    report = {"schema_version": 1, "experiment": "coexist", "sampler": None, "sampler_id": None,
              "master_seed": 0, "trials": 0, "parameters": {}, "estimates": [], "flags": {}, "failures": []}
    validate_report(report)
    import jsonschema

    with pytest.raises(jsonschema.ValidationError):
        validate_report({**report, "extra": 1})
    with pytest.raises(jsonschema.ValidationError):
        validate_report({**report, "experiment": "other"})
    assert report_schema()["properties"]["schema_version"]["const"] == 1


def test_svg_single_cell():
    doc = svg_document(Configuration.constant(Box(0), 1))
    assert doc.count('class="cell"') == 1
    assert doc.startswith("<svg") and doc.endswith("</svg>\n")
    assert 'width="60"' in doc  # one cell plus a margin of one cell each side


def test_svg_ring_polygon_has_eight_vertices():
    doc = svg_document(None, [Circuit(RING8, Kind.STAR)])
    (points,) = re.findall(r'<polygon class="circuit" points="([^"]+)"', doc)
    assert len(points.split()) == 8


def test_svg_necklet_pearls_and_curve():
    nk = Necklet(Circuit(RING8, Kind.NEAREST), ((1, 0),))
    doc = svg_document(None, [nk])
    assert doc.count('class="pearl"') == 1
    curve = boundary_curve_of_sites([(0, 0), (1, 1)])
    assert svg_document(None, [curve]).count('class="curve"') == 1
    with pytest.raises(ValueError):
        svg_document(None, [])


def test_svg_matches_golden(tmp_path):
    cfg = Configuration.from_sites(Box(1), [(0, 0), (1, 1)])
    diamond = Circuit(((1, 0), (0, 1), (-1, 0), (0, -1)), Kind.STAR)
    path = render_svg(cfg, tmp_path / "g.svg", overlays=[boundary_curve_of_sites([(0, 0), (1, 1)]), diamond])
    assert path.read_bytes() == (DATA / "golden_small.svg").read_bytes()
    # lattice y grows upwards: the site (1, 1) is drawn above and right of (0, 0)
    assert '<rect class="cell" x="60" y="20"' in path.read_text()


def test_render_reports_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        render_svg(Configuration.constant(Box(0), 1), tmp_path / "missing" / "x.svg")


def test_render_is_deterministic(tmp_path, rng):
    cfg = Configuration(Box(5), rng.random((11, 11)) < 0.5)
    a = render_svg(cfg, tmp_path / "a.svg").read_bytes()
    b = render_svg(Configuration(Box(5), np.array(cfg.spins)), tmp_path / "b.svg").read_bytes()
    assert a == b
