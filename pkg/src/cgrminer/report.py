"""Report serialization (JSON, CSV) and SVG box plots."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import xml.etree.ElementTree as ET
from pathlib import Path

from .analyzer import (
    CLASSIFICATIONS,
    AnalysisConfig,
    AnalysisReport,
    CgrRecord,
    LevelSummary,
    TypeRatio,
    UnitSummary,
)
from .detector import coerce_type, instance_from_record, instance_to_record
from .errors import SchemaError
from .squash import SquashUnit, Strategy

REPORT_FORMAT = "cgrminer-report/1"
REPORT_FILE = "report.json"
FREQUENCY_CSV = "frequency.csv"
RATIO_CSV = "ratio.csv"
CGRS_CSV = "cgrs.csv"
PLOT_FILE = "frequency.svg"

FREQUENCY_COLUMNS = ("level", "units", "effective", "frequency")
RATIO_COLUMNS = ("type", "cgr_count", "effective_count", "ratio")
CGRS_COLUMNS = ("level", "unit_first_commit", "type", "classification", "description")


def fmt(value: float | None) -> str:
    """Six significant digits, ``NA`` for undefined values."""
    return "NA" if value is None else f"{value:.6g}"


def _num(value: float | None):
    return None if value is None else float(f"{value:.6g}")


# -- structured (JSON) -----------------------------------------------------


def _unit_to_dict(unit: SquashUnit) -> dict:
    return {
        "sequence_id": unit.sequence_id,
        "level": unit.strategy.level,
        "offset": unit.strategy.offset,
        "commits": list(unit.commits),
    }


def report_to_dict(report: AnalysisReport) -> dict:
    cfg = report.config
    return {
        "format": REPORT_FORMAT,
        "config": {
            "threshold": cfg.threshold,
            "levels": list(cfg.levels),
            "extension": cfg.extension,
            "classification": cfg.classification,
        },
        "levels": [
            {"level": s.level, "units": s.units, "effective": s.effective,
             "frequency": _num(s.frequency)}
            for s in report.levels
        ],
        "ratios": [
            {"type": str(r.type), "cgr_count": r.cgr_count,
             "effective_count": r.effective_count, "ratio": _num(r.ratio)}
            for r in report.ratios
        ],
        "units": [
            {"level": u.level, "offset": u.offset, "sequence_id": u.sequence_id,
             "commits": list(u.commits), "fine_instances": u.fine_instances,
             "coarse_instances": u.coarse_instances, "cgrs": u.cgrs}
            for u in report.units
        ],
        "cgrs": [
            {"level": c.level, "unit": _unit_to_dict(c.unit),
             "classification": c.classification, **instance_to_record(c.instance)}
            for c in report.cgrs
        ],
    }


def dumps_report(report: AnalysisReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"


def _field(obj, key, kind, where):
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", where)
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", where)
    value = obj[key]
    ok = isinstance(value, kind) and not (kind is int and isinstance(value, bool))
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise SchemaError(f"field {key!r} has the wrong type", where)
    return value


def _list(obj, key, where) -> list:
    return _field(obj, key, list, where)


def report_from_dict(doc) -> AnalysisReport:
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise SchemaError(f"not a {REPORT_FORMAT} document", "$")
    c = _field(doc, "config", dict, "$")
    config = AnalysisConfig(
        float(_field(c, "threshold", float, "$.config")),
        tuple(_list(c, "levels", "$.config")),
        _field(c, "extension", str, "$.config"),
        _field(c, "classification", str, "$.config"),
    )
    levels = tuple(
        LevelSummary(_field(x, "level", int, f"$.levels[{i}]"), _field(x, "units", int, f"$.levels[{i}]"),
                     _field(x, "effective", int, f"$.levels[{i}]"))
        for i, x in enumerate(_list(doc, "levels", "$")))
    ratios = tuple(
        TypeRatio(coerce_type(_field(x, "type", str, f"$.ratios[{i}]")),
                  _field(x, "cgr_count", int, f"$.ratios[{i}]"),
                  _field(x, "effective_count", int, f"$.ratios[{i}]"))
        for i, x in enumerate(_list(doc, "ratios", "$")))
    units = []
    for i, x in enumerate(_list(doc, "units", "$")):
        w = f"$.units[{i}]"
        units.append(UnitSummary(
            _field(x, "level", int, w), _field(x, "offset", int, w), _field(x, "sequence_id", str, w),
            tuple(_list(x, "commits", w)), _field(x, "fine_instances", int, w),
            _field(x, "coarse_instances", int, w), _field(x, "cgrs", int, w)))
    cgrs = []
    for i, x in enumerate(_list(doc, "cgrs", "$")):
        w = f"$.cgrs[{i}]"
        u = _field(x, "unit", dict, w)
        classification = _field(x, "classification", str, w)
        if classification not in CLASSIFICATIONS:
            raise SchemaError(f"unknown classification {classification!r}", w)
        try:
            unit = SquashUnit(tuple(_list(u, "commits", w + ".unit")),
                              Strategy(_field(u, "level", int, w + ".unit"),
                                       _field(u, "offset", int, w + ".unit")),
                              _field(u, "sequence_id", str, w + ".unit"))
        except ValueError as exc:
            raise SchemaError(str(exc), w + ".unit") from None
        cgrs.append(CgrRecord(instance_from_record(x, w), unit, _field(x, "level", int, w), classification))
    return AnalysisReport(config, levels, ratios, tuple(units), tuple(cgrs))


def loads_report(text: str) -> AnalysisReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"line {exc.lineno}") from None
    return report_from_dict(doc)


def read_report(path: Path) -> AnalysisReport:
    return loads_report(Path(path).read_text(encoding="utf-8"))


# -- tabular (CSV) ---------------------------------------------------------


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def frequency_csv(report: AnalysisReport) -> str:
    return _csv(FREQUENCY_COLUMNS,
                [(s.level, s.units, s.effective, fmt(s.frequency)) for s in report.levels])


def ratio_csv(report: AnalysisReport) -> str:
    return _csv(RATIO_COLUMNS,
                [(str(r.type), r.cgr_count, r.effective_count, fmt(r.ratio)) for r in report.ratios])


def cgrs_csv(report: AnalysisReport) -> str:
    return _csv(CGRS_COLUMNS,
                [(c.level, c.unit.first, str(c.instance.type), c.classification, c.instance.description)
                 for c in report.cgrs])


# -- box plot --------------------------------------------------------------


def box_stats(samples: list[float]) -> dict:
    """Quartiles (linear interpolation), 1.5*IQR whiskers and outliers."""
    data = sorted(samples)
    if len(data) == 1:
        q1 = med = q3 = data[0]
    else:
        q1, med, q3 = statistics.quantiles(data, n=4, method="inclusive")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = [x for x in data if lo_fence <= x <= hi_fence]
    return {
        "q1": q1, "median": med, "q3": q3,
        "whisker_low": min(inside), "whisker_high": max(inside),
        "outliers": [x for x in data if x < lo_fence or x > hi_fence],
    }


def _nice_top(value: float) -> float:
    if value <= 0:
        return 1.0
    exp = math.floor(math.log10(value))
    for step in (1, 2, 2.5, 5, 10):
        top = step * 10 ** exp
        if top >= value:
            return top
    return 10 ** (exp + 1)


def render_boxplot(samples_by_level: dict[int, list[float]], title: str = "Frequency of CGRs") -> str:
    if not samples_by_level:
        raise SchemaError("report has no granularity levels to plot")
    levels = sorted(samples_by_level)
    width, height = 120 + 100 * len(levels), 360
    left, right, top, bottom = 70, 20, 40, 60
    plot_h = height - top - bottom
    y_max = _nice_top(max((x for xs in samples_by_level.values() for x in xs), default=0.0))

    def y(v: float) -> str:
        return fmt(top + plot_h * (1 - v / y_max))

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    ET.SubElement(svg, "text", x=str(width // 2), y="22", **{"text-anchor": "middle",
                  "font-family": "sans-serif", "font-size": "14"}).text = title
    axis = {"stroke": "black", "stroke-width": "1"}
    ET.SubElement(svg, "line", x1=str(left), y1=str(top), x2=str(left), y2=str(top + plot_h), **axis)
    ET.SubElement(svg, "line", x1=str(left), y1=str(top + plot_h), x2=str(width - right),
                  y2=str(top + plot_h), **axis)
    for k in range(5):
        v = y_max * k / 4
        ET.SubElement(svg, "line", x1=str(left - 4), y1=y(v), x2=str(left), y2=y(v), **axis)
        ET.SubElement(svg, "text", x=str(left - 8), y=y(v), **{"text-anchor": "end",
                      "font-family": "sans-serif", "font-size": "10"}).text = fmt(v)
    ET.SubElement(svg, "text", x=str((left + width - right) // 2), y=str(height - 15),
                  **{"text-anchor": "middle", "font-family": "sans-serif",
                     "font-size": "12"}).text = "coarse granularity"

    slot = (width - left - right) / len(levels)
    for idx, level in enumerate(levels):
        cx = left + slot * (idx + 0.5)
        group = ET.SubElement(svg, "g", {"class": "box", "data-level": str(level),
                                         "data-samples": str(len(samples_by_level[level]))})
        ET.SubElement(group, "text", x=fmt(cx), y=str(top + plot_h + 18),
                      **{"text-anchor": "middle", "font-family": "sans-serif",
                         "font-size": "12"}).text = str(level)
        samples = samples_by_level[level]
        if not samples:
            continue
        st = box_stats(samples)
        half = min(25.0, slot / 3)
        line = {"stroke": "black", "stroke-width": "1"}
        ET.SubElement(group, "line", x1=fmt(cx), y1=y(st["whisker_low"]), x2=fmt(cx), y2=y(st["q1"]), **line)
        ET.SubElement(group, "line", x1=fmt(cx), y1=y(st["q3"]), x2=fmt(cx), y2=y(st["whisker_high"]), **line)
        for w in ("whisker_low", "whisker_high"):
            ET.SubElement(group, "line", x1=fmt(cx - half / 2), y1=y(st[w]), x2=fmt(cx + half / 2),
                          y2=y(st[w]), **line)
        ET.SubElement(group, "rect", x=fmt(cx - half), y=y(st["q3"]), width=fmt(2 * half),
                      height=fmt(plot_h * (st["q3"] - st["q1"]) / y_max),
                      fill="#cfe0f3", stroke="black")
        ET.SubElement(group, "line", x1=fmt(cx - half), y1=y(st["median"]), x2=fmt(cx + half),
                      y2=y(st["median"]), stroke="black", **{"stroke-width": "2"})
        for o in st["outliers"]:
            ET.SubElement(group, "circle", {"class": "outlier", "cx": fmt(cx), "cy": y(o), "r": "3",
                                            "fill": "none", "stroke": "black"})
    return ET.tostring(svg, encoding="unicode") + "\n"


def report_boxplot(report: AnalysisReport) -> str:
    return render_boxplot(report.sequence_frequencies())


# -- output ----------------------------------------------------------------


def emit_report(report: AnalysisReport, fmt_kind: str, out_dir: Path) -> list[Path]:
    """Write the report in ``structured``, ``tabular`` or ``both`` formats."""
    if fmt_kind not in ("structured", "tabular", "both"):
        raise ValueError(f"unknown report format {fmt_kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    if fmt_kind in ("structured", "both"):
        outputs[REPORT_FILE] = dumps_report(report)
    if fmt_kind in ("tabular", "both"):
        outputs[FREQUENCY_CSV] = frequency_csv(report)
        outputs[RATIO_CSV] = ratio_csv(report)
        outputs[CGRS_CSV] = cgrs_csv(report)
    written = []
    for name, text in outputs.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8", newline="")
        written.append(path)
    return written
