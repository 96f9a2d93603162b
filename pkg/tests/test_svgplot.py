"""Tests for the SVG chart writers."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from projsel.svgplot import bar_chart, box_plot, line_plot


def _parse(path):
    tree = ET.parse(str(path))
    return tree.getroot()


def _tags(root):
    return [el.tag.split("}")[-1] for el in root.iter()]


class TestLinePlot:
    def test_valid_xml_with_one_polyline_per_series(self, tmp_path):
        p = tmp_path / "l.svg"
        line_plot(str(p), [0, 1, 2], [[1.0, 2.0, 1.5], [0.5, 0.4, 0.9]],
                  labels=["a", "b"], title="t", xlabel="x", ylabel="y")
        root = _parse(p)
        assert root.tag.endswith("svg")
        assert _tags(root).count("polyline") == 2

    def test_nan_breaks_polyline(self, tmp_path):
        p = tmp_path / "l.svg"
        line_plot(str(p), [0, 1, 2, 3],
                  [[1.0, np.nan, 2.0, 2.5]], title="t")
        root = _parse(p)
        polys = [el for el in root.iter() if el.tag.endswith("polyline")]
        assert len(polys) == 2
        assert len(polys[0].get("points").split()) == 1
        assert len(polys[1].get("points").split()) == 2

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        rng = np.random.default_rng(0)
        ys = rng.standard_normal((8, 5))
        for p in (a, b):
            line_plot(str(p), range(5), list(ys), title="curves",
                      xlabel="size", ylabel="v", hline=0.0)
        assert a.read_bytes() == b.read_bytes()

    def test_hline_drawn_dashed(self, tmp_path):
        p = tmp_path / "l.svg"
        line_plot(str(p), [0, 1], [[0.2, 0.4]], hline=0.0)
        assert 'stroke-dasharray' in p.read_text()

    def test_many_series_muted_single_color(self, tmp_path):
        p = tmp_path / "l.svg"
        line_plot(str(p), [0, 1], [[0.0, float(k)] for k in range(30)])
        text = p.read_text()
        assert text.count("stroke-opacity") == 30


class TestBoxPlot:
    def test_boxes_and_medians(self, tmp_path):
        p = tmp_path / "b.svg"
        box_plot(str(p), [[1.0, 2.0, 3.0, 4.0], [10.0, 12.0]],
                 labels=["aug", "lat"], title="runtime", ylabel="minutes")
        root = _parse(p)
        rects = [el for el in root.iter() if el.tag.endswith("rect")]
        # background + frame + two boxes
        assert len(rects) == 4
        assert "aug" in p.read_text() and "lat" in p.read_text()

    def test_median_line_position(self, tmp_path):
        p = tmp_path / "b.svg"
        box_plot(str(p), [[0.0, 1.0, 2.0]], labels=["g"])
        root = _parse(p)
        thick = [el for el in root.iter()
                 if el.tag.endswith("line") and el.get("stroke-width") == "2"]
        assert len(thick) == 1

    def test_empty_group_skipped(self, tmp_path):
        p = tmp_path / "b.svg"
        box_plot(str(p), [[1.0, 2.0], []], labels=["a", "b"])
        assert p.exists()


class TestBarChart:
    def test_one_bar_per_category(self, tmp_path):
        p = tmp_path / "h.svg"
        bar_chart(str(p), ["-1", "0", "1", "NA_aug", "NA_lat", "NA_both"],
                  [2, 10, 4, 0, 3, 1], title="size differences")
        root = _parse(p)
        rects = [el for el in root.iter() if el.tag.endswith("rect")]
        # background + frame + six bars
        assert len(rects) == 8
        assert "NA_both" in p.read_text()

    def test_zero_count_bar_has_zero_height(self, tmp_path):
        p = tmp_path / "h.svg"
        bar_chart(str(p), ["a", "b"], [0, 5])
        root = _parse(p)
        bars = [el for el in root.iter() if el.tag.endswith("rect")][2:]
        assert float(bars[0].get("height")) == 0.0
        assert float(bars[1].get("height")) > 0.0

    def test_deterministic(self, tmp_path):
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        for p in (a, b):
            bar_chart(str(p), ["0", "1"], [3, 4])
        assert a.read_bytes() == b.read_bytes()


class TestScales:
    def test_constant_series_still_renders(self, tmp_path):
        p = tmp_path / "c.svg"
        line_plot(str(p), [0, 1, 2], [[1.0, 1.0, 1.0]])
        assert p.exists() and _parse(p) is not None

    def test_all_nan_series_renders_empty_axes(self, tmp_path):
        p = tmp_path / "n.svg"
        line_plot(str(p), [0, 1], [[np.nan, np.nan]])
        root = _parse(p)
        assert _tags(root).count("polyline") == 0
