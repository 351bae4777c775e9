import numpy as np
import pytest

from errors import DomainError
from plotting import IsometricProjection, region_vertices, render_region_svg, wireframe_edges, write_region_svg
from rate_region import analytic_region, closed_form_region_3flow
from switch_model import FlowSpec, LinkParam, build_topology


def test_disjoint_region_is_a_cube():
    region = closed_form_region_3flow(0.632, "C")
    vertices = region_vertices(region)
    assert len(vertices) == 8
    np.testing.assert_allclose(vertices.max(axis=0), [0.399424] * 3, atol=1e-9)
    assert len(wireframe_edges(region)) == 12


def test_contending_region_vertices_satisfy_planes():
    region = closed_form_region_3flow(0.632, "A")
    a, b = region.halfspaces()
    vertices = region_vertices(region)
    assert len(vertices) > 4
    assert np.all(vertices @ a.T <= b + 1e-9)
    assert np.all(vertices >= -1e-9)


def test_zero_region_has_no_wireframe():
    assert wireframe_edges(closed_form_region_3flow(0.0, "A")) == []


def test_projection_is_deterministic():
    project = IsometricProjection(1.0)
    assert project((0.0, 0.0, 0.0)) == project((0.0, 0.0, 0.0))
    assert project((0.0, 0.0, 1.0))[1] < project((0.0, 0.0, 0.0))[1]


def test_svg_contents():
    region = closed_form_region_3flow(0.632, "C")
    points = [((0.1, 0.1, 0.1), True), ((0.9, 0.9, 0.9), False), ((0.2, 0.0, 0.3), True)]
    svg = render_region_svg(region, points, title="Scenario C")
    assert svg.startswith("<?xml")
    assert "Scenario C" in svg
    assert svg.count("<circle") == 3 + 2
    assert svg.count("<line") == 12 + 3 + 1
    assert render_region_svg(region, points, title="Scenario C") == svg


def test_title_is_escaped():
    svg = render_region_svg(closed_form_region_3flow(0.5, "A"), title="p<1 & q=1")
    assert "p&lt;1 &amp; q=1" in svg


def test_only_three_flows():
    links = [LinkParam.direct(0.5)] * 2
    topology = build_topology([1, 2], links, [FlowSpec(1, (1, 2))])
    with pytest.raises(DomainError):
        render_region_svg(analytic_region(topology))


def test_write_svg(tmp_path):
    path = write_region_svg(tmp_path / "plot.svg", closed_form_region_3flow(0.632, "B"))
    assert path.read_text(encoding="utf-8").rstrip().endswith("</svg>")
