"""Machine-readable run reports.

Reports are plain dicts shaped by docs/report-schema.json. JSON is the
primary format; markdown renders the same numbers as tables. Infinite PSNR
values serialize as the string "inf" so reports stay valid JSON.
"""

import json
import math
from pathlib import Path


def _encode(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            raise ValueError("reports must not contain NaN")
        return value
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def to_json(report) -> str:
    return json.dumps(_encode(report), indent=2, sort_keys=True) + "\n"


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.4f}"
    return str(value)


def to_markdown(report) -> str:
    lines = [f"# microstack report (v{report.get('tool_version', '?')})", ""]
    lines.append(f"- seed: {report.get('seed')}")
    config = report.get("config", {})
    if config:
        lines.append("")
        lines.append("## Config")
        lines.append("")
        lines.append("| key | value |")
        lines.append("| --- | --- |")
        for k in sorted(config):
            lines.append(f"| {k} | {_fmt(config[k])} |")
    frames = report.get("frames")
    if frames:
        lines.append("")
        lines.append("## Frames")
        lines.append("")
        lines.append("| index | decision | mean_level |")
        lines.append("| --- | --- | --- |")
        for fr in frames:
            lines.append(
                f"| {fr['index']} | {fr['decision']} | {_fmt(fr['mean_level'])} |"
            )
    for section in ("deblur", "fusion", "quality"):
        data = report.get(section)
        if data:
            lines.append("")
            lines.append(f"## {section.capitalize()}")
            lines.append("")
            lines.append("| key | value |")
            lines.append("| --- | --- |")
            for k in sorted(data):
                lines.append(f"| {k} | {_fmt(data[k])} |")
    timings = report.get("timings", {})
    if timings:
        lines.append("")
        lines.append("## Timings (s)")
        lines.append("")
        lines.append("| stage | seconds |")
        lines.append("| --- | --- |")
        for k in sorted(timings):
            lines.append(f"| {k} | {_fmt(timings[k])} |")
    return "\n".join(lines) + "\n"


def write_report(report, path, format="json"):
    """Write the report as JSON or markdown."""
    path = Path(path)
    if format == "json":
        text = to_json(report)
    elif format in ("md", "markdown"):
        text = to_markdown(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path.write_text(text)
    return path
