import xml.etree.ElementTree as ET

import pytest

from canyonpl.plots import box_plot_svg, scatter_svg, weight_bars_svg, write_svg

NS = "{http://www.w3.org/2000/svg}"


def parse(svg):
    return ET.fromstring(svg)


def test_box_plot():
    svg = box_plot_svg([("lasso", [3.0, 4.0, 5.0]), ("rf", [2.0, 2.5, 6.0]), ("a<b", [1.0])])
    root = parse(svg)
    boxes = [g for g in root.iter(f"{NS}g") if g.get("class") == "box"]
    assert [b.get("data-label") for b in boxes] == ["lasso", "rf", "a<b"]


def test_scatter_counts_and_determinism(tmp_path):
    m = [100.0, 110.0, 120.5, 98.2]
    p = [101.0, 108.0, 119.0, 99.9]
    svg = scatter_svg(m, p)
    assert len([c for c in parse(svg).iter(f"{NS}circle") if c.get("class") == "pt"]) == 4
    write_svg(tmp_path / "a.svg", svg)
    write_svg(tmp_path / "b.svg", scatter_svg(list(m), list(p)))
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_scatter_identity_points_on_diagonal():
    root = parse(scatter_svg([90.0, 130.0], [90.0, 130.0]))
    pts = [(float(c.get("cx")), float(c.get("cy"))) for c in root.iter(f"{NS}circle")]
    # equal axes ranges: x and y pixel offsets mirror each other
    (x0, y0), (x1, y1) = pts
    assert (x1 - x0) / (y0 - y1) == pytest.approx(560 / 320, rel=1e-3)


def test_weight_bars():
    svg = weight_bars_svg([("log3d", 4.0, 3.5, 4.5), ("width", -0.1, -0.2, 0.0)])
    bars = [r for r in parse(svg).iter(f"{NS}rect") if r.get("class") == "bar"]
    assert len(bars) == 2 and float(bars[0].get("height")) > float(bars[1].get("height"))


@pytest.mark.parametrize("call", [lambda: box_plot_svg([]), lambda: scatter_svg([], []),
                                  lambda: scatter_svg([1.0], [1.0, 2.0]), lambda: weight_bars_svg([])])
def test_empty_inputs(call):
    with pytest.raises(ValueError):
        call()


def test_constant_values():
    parse(box_plot_svg([("x", [2.0, 2.0])]))
    parse(scatter_svg([5.0], [5.0]))
