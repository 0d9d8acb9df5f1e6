"""SVG scalp-map rendering: validation, color law, byte determinism."""

import numpy as np
import pytest

from eegaze.data import default_layout
from eegaze.topomap import TopomapSpec, diverging_color, render_topomap, save_topomap


def spec_for(n=8, field=None, **kw):
    layout = default_layout(n)
    if field is None:
        field = np.linspace(-1.0, 1.0, n)
    return TopomapSpec(layout=layout, field=field, **kw)


def test_spec_validates_field_length():
    layout = default_layout(4)
    with pytest.raises(ValueError):
        TopomapSpec(layout=layout, field=np.zeros(5))
    with pytest.raises(ValueError):
        TopomapSpec(layout=layout, field=np.zeros((4, 2)))


def test_spec_validates_highlight_indices():
    with pytest.raises(ValueError):
        spec_for(4, highlights={4})
    with pytest.raises(ValueError):
        spec_for(4, highlights={-1})
    assert spec_for(4, highlights={0, 3}).highlights == frozenset({0, 3})


def test_diverging_color_anchors():
    vmax = 2.0
    assert diverging_color(0.0, vmax) == "#f7f7f7"  # neutral
    assert diverging_color(2.0, vmax) == "#b2182b"  # saturated positive
    assert diverging_color(-2.0, vmax) == "#2166ac"  # saturated negative
    assert diverging_color(5.0, vmax) == "#b2182b"  # clipped beyond vmax


def test_diverging_color_zero_vmax_is_neutral():
    assert diverging_color(3.0, 0.0) == "#f7f7f7"
    assert diverging_color(-3.0, 0.0) == "#f7f7f7"


def test_render_is_valid_svg_with_all_electrodes():
    import xml.etree.ElementTree as ET

    svg = render_topomap(spec_for(8, title="demo"))
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert ">demo<" in svg
    circles = svg.count("<circle")
    assert circles >= 8 + 1  # one per electrode plus the head outline


def test_render_byte_deterministic():
    a = render_topomap(spec_for(12))
    b = render_topomap(spec_for(12))
    assert a == b


def test_zero_field_renders_all_neutral():
    svg = render_topomap(spec_for(6, field=np.zeros(6)))
    assert "#f7f7f7" in svg
    assert "#b2182b" not in svg and "#2166ac" not in svg


def test_highlight_rings_rendered_for_each_highlight():
    plain = render_topomap(spec_for(6))
    ringed = render_topomap(spec_for(6, highlights={1, 4}))
    assert plain.count("#ffd700") == 0
    assert ringed.count("#ffd700") == 2


def test_title_is_escaped():
    svg = render_topomap(spec_for(4, title='a<b&"c"'))
    assert "a&lt;b&amp;&quot;c&quot;" in svg
    assert "a<b" not in svg


def test_save_topomap_round_trip(tmp_path):
    spec = spec_for(8)
    path = tmp_path / "map.svg"
    save_topomap(spec, path)
    assert path.read_bytes().decode("utf-8") == render_topomap(spec)
