import math
import xml.etree.ElementTree as ET

from staircase.svg import line_chart

NS = "{http://www.w3.org/2000/svg}"


def polylines(doc):
    return ET.fromstring(doc).iter(NS + "polyline")


class TestLineChart:
    def test_parses(self):
        doc = line_chart({"a": ([0, 1, 2], [3.0, 1.0, 2.0])}, title="t", xlabel="x", ylabel="y")
        root = ET.fromstring(doc)
        assert root.tag == NS + "svg"
        assert any(t.text == "t" for t in root.iter(NS + "text"))

    def test_log_drops_non_positive(self):
        doc = line_chart({"a": ([0, 1, 2, 3], [1.0, 0.0, -1.0, 0.1])}, log_y=True)
        (line,) = polylines(doc)
        assert len(line.get("points").split()) == 2

    def test_drops_non_finite(self):
        doc = line_chart({"a": ([0, 1, 2], [math.nan, 1.0, math.inf])})
        (line,) = polylines(doc)
        assert len(line.get("points").split()) == 1

    def test_empty_and_constant(self):
        ET.fromstring(line_chart({}))
        ET.fromstring(line_chart({"a": ([1, 1], [2.0, 2.0])}, hlines={"thr": 2.0}))

    def test_one_line_per_series(self):
        doc = line_chart({"a": ([0, 1], [1, 2]), "b": ([0, 1], [2, 1])})
        assert len(list(polylines(doc))) == 2
