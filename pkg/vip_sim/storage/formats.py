"""Text and binary codecs for every artifact the CLI reads or writes.

Floats are written with ``repr`` so that reading a file back gives the
exact same values. Parse errors raise :class:`FileFormatError` naming the
byte offset of the offending record.
"""

import json
import math
import struct
from collections.abc import Mapping, Sequence
from typing import Any, Optional

import numpy as np
import tomli

from vip_sim.analysis.spectrum import Spectrum, SpectrumLabel
from vip_sim.ccd.frames import Frame
from vip_sim.errors import FileFormatError

SPECTRUM_HEADER = ("bin_lo_keV", "bin_hi_keV", "counts", "error")
BACKGROUND_HEADER = ("energy_keV", "relative_rate")
FIGURE2_HEADER = ("bin_center_keV", "on_counts", "on_error", "off_counts", "off_error")
DIFFERENCE_HEADER = ("bin_center_keV", "difference", "error")

#: width, height, panel_id (uint32) and exposure in minutes (float32), little-endian.
FRAME_HEADER = struct.Struct("<IIIf")

_EDGE_RTOL = 1e-9


def _lines_with_offsets(text: str):
    """Yield ``(byte_offset, line)`` pairs with line endings stripped."""
    offset = 0
    for raw in text.splitlines(keepends=True):
        yield offset, raw.rstrip("\r\n")
        offset += len(raw.encode("utf-8"))


def _byte_length(text: str) -> int:
    return len(text.encode("utf-8"))


def _parse_header(line: str, expected: Sequence[str], offset: int) -> None:
    found = tuple(field.strip() for field in line.split(","))
    if found != tuple(expected):
        raise FileFormatError(f"Expected header {','.join(expected)!r}, found {line!r}", offset)


def _parse_floats(line: str, width: int, offset: int) -> list[float]:
    fields = line.split(",")
    if len(fields) != width:
        raise FileFormatError(f"Expected {width} comma-separated values, found {len(fields)}", offset)
    try:
        return [float(field) for field in fields]
    except ValueError as exc:
        raise FileFormatError(f"Not a number: {exc}", offset) from None


def read_numeric_csv(text: str, header: Sequence[str]) -> list[np.ndarray]:
    """Columns of a ``#``-commented CSV whose first row is ``header``."""
    columns: list[list[float]] = [[] for _ in header]
    seen_header = False
    for offset, line in _lines_with_offsets(text):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if not seen_header:
            _parse_header(line, header, offset)
            seen_header = True
            continue
        for column, value in zip(columns, _parse_floats(line, len(header), offset)):
            column.append(value)
    if not seen_header:
        raise FileFormatError(f"Missing header {','.join(header)!r}", _byte_length(text))
    return [np.asarray(column, dtype=float) for column in columns]


def _parse_comment_fields(line: str, offset: int) -> dict[str, str]:
    fields = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if not sep:
            raise FileFormatError(f"Malformed metadata token {token!r}", offset)
        fields[key] = value
    return fields


# Spectra


def write_spectrum_csv(spectrum: Spectrum) -> str:
    edges = spectrum.edges
    lines = [
        f"# live_time_min={spectrum.live_time!r} label={spectrum.label.value} "
        f"bin_width_keV={spectrum.bin_width!r} bin_count={spectrum.bin_count} "
        f"underflow={spectrum.underflow!r} overflow={spectrum.overflow!r}",
        ",".join(SPECTRUM_HEADER),
    ]
    for i in range(spectrum.bin_count):
        lines.append(
            f"{float(edges[i])!r},{float(edges[i + 1])!r},{float(spectrum.counts[i])!r},{float(spectrum.errors[i])!r}"
        )
    return "\n".join(lines) + "\n"


def read_spectrum_csv(text: str) -> Spectrum:
    meta: Optional[dict[str, str]] = None
    meta_offset = 0
    seen_header = False
    rows: list[list[float]] = []
    row_offsets: list[int] = []
    for offset, line in _lines_with_offsets(text):
        if not line.strip():
            continue
        if line.startswith("#"):
            if meta is None:
                meta, meta_offset = _parse_comment_fields(line, offset), offset
            continue
        if not seen_header:
            _parse_header(line, SPECTRUM_HEADER, offset)
            seen_header = True
            continue
        rows.append(_parse_floats(line, len(SPECTRUM_HEADER), offset))
        row_offsets.append(offset)

    end = _byte_length(text)
    if meta is None or "live_time_min" not in meta or "label" not in meta:
        raise FileFormatError("Missing '# live_time_min=... label=...' metadata line", meta_offset if meta else 0)
    if not seen_header:
        raise FileFormatError(f"Missing header {','.join(SPECTRUM_HEADER)!r}", end)
    if not rows:
        raise FileFormatError("Spectrum has no bins", end)
    try:
        live_time = float(meta["live_time_min"])
        label = SpectrumLabel(meta["label"])
        expected = int(meta["bin_count"]) if "bin_count" in meta else len(rows)
        underflow = float(meta.get("underflow", 0.0))
        overflow = float(meta.get("overflow", 0.0))
    except ValueError as exc:
        raise FileFormatError(f"Bad metadata value: {exc}", meta_offset) from None
    if len(rows) != expected:
        raise FileFormatError(f"Truncated spectrum: metadata announces {expected} bins, found {len(rows)}", end)

    data = np.asarray(rows)
    bin_lo = float(data[0, 0])
    bin_width = float(meta["bin_width_keV"]) if "bin_width_keV" in meta else float(data[0, 1] - data[0, 0])
    for i, (lo, hi) in enumerate(data[:, :2]):
        expected_lo = bin_lo + i * bin_width
        if not (
            math.isclose(lo, expected_lo, rel_tol=_EDGE_RTOL, abs_tol=1e-12)
            and math.isclose(hi, expected_lo + bin_width, rel_tol=_EDGE_RTOL, abs_tol=1e-12)
        ):
            raise FileFormatError(f"Bin {i} edges [{lo}, {hi}] break the uniform binning", row_offsets[i])
    try:
        return Spectrum(
            bin_lo=bin_lo,
            bin_width=bin_width,
            counts=data[:, 2],
            errors=data[:, 3],
            live_time=live_time,
            label=label,
            underflow=underflow,
            overflow=overflow,
        )
    except ValueError as exc:
        raise FileFormatError(f"Invalid spectrum: {exc}", row_offsets[0]) from None


def write_figure2_csv(on: Spectrum, off: Spectrum) -> str:
    lines = [",".join(FIGURE2_HEADER)]
    for x, n_on, e_on, n_off, e_off in zip(on.centers, on.counts, on.errors, off.counts, off.errors):
        lines.append(f"{float(x)!r},{float(n_on)!r},{float(e_on)!r},{float(n_off)!r},{float(e_off)!r}")
    return "\n".join(lines) + "\n"


def write_difference_csv(difference: Spectrum, mask: Optional[np.ndarray] = None) -> str:
    lines = [",".join(DIFFERENCE_HEADER)]
    keep = np.ones(difference.bin_count, dtype=bool) if mask is None else mask
    for x, n, e in zip(difference.centers[keep], difference.counts[keep], difference.errors[keep]):
        lines.append(f"{float(x)!r},{float(n)!r},{float(e)!r}")
    return "\n".join(lines) + "\n"


# Reports


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"Cannot write {type(value).__name__} to a report")


def write_report(report: Mapping[str, Any], title: Optional[str] = None) -> str:
    """``key = value`` lines; nested mappings become ``[section]`` tables and ``None`` values are left out."""
    lines = [f"# {title}"] if title else []
    tables = []
    for key, value in report.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            tables.append((key, value))
            continue
        lines.append(f"{key} = {_toml_value(value)}")
    for name, table in tables:
        lines.append("")
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in table.items() if v is not None)
    return "\n".join(lines) + "\n"


def read_report(text: str) -> dict[str, Any]:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        pos = getattr(exc, "pos", None)
        offset = _byte_length(text[:pos]) if pos is not None else None
        raise FileFormatError(f"Malformed report: {exc}", offset) from None


# Frames


def write_frame_binary(frame: Frame) -> bytes:
    header = FRAME_HEADER.pack(frame.width, frame.height, frame.panel_id, frame.exposure)
    return header + frame.pixels.astype("<u2").tobytes()


def read_frame_binary(data: bytes) -> Frame:
    if len(data) < FRAME_HEADER.size:
        raise FileFormatError(f"Frame header needs {FRAME_HEADER.size} bytes, file has {len(data)}", len(data))
    width, height, panel_id, exposure = FRAME_HEADER.unpack_from(data)
    expected = FRAME_HEADER.size + 2 * width * height
    if len(data) != expected:
        raise FileFormatError(
            f"Frame of {width}x{height} pixels needs {expected} bytes, file has {len(data)}", min(len(data), expected)
        )
    pixels = np.frombuffer(data, dtype="<u2", offset=FRAME_HEADER.size).reshape(height, width).astype(np.uint16)
    try:
        return Frame(pixels=pixels, panel_id=panel_id, exposure=float(exposure))
    except ValueError as exc:
        raise FileFormatError(f"Invalid frame: {exc}", 0) from None


def write_frame_csv(frame: Frame) -> str:
    lines = [
        f"# width={frame.width} height={frame.height} panel_id={frame.panel_id} exposure_min={frame.exposure!r}"
    ]
    lines.extend(",".join(str(int(v)) for v in row) for row in frame.pixels)
    return "\n".join(lines) + "\n"


def read_frame_csv(text: str) -> Frame:
    meta: Optional[dict[str, str]] = None
    rows: list[list[int]] = []
    for offset, line in _lines_with_offsets(text):
        if not line.strip():
            continue
        if line.startswith("#"):
            if meta is None:
                meta = _parse_comment_fields(line, offset)
            continue
        try:
            rows.append([int(v) for v in line.split(",")])
        except ValueError:
            raise FileFormatError("Frame rows must be comma-separated integers", offset) from None
        if meta is not None and len(rows[-1]) != int(meta.get("width", len(rows[-1]))):
            raise FileFormatError(f"Row {len(rows) - 1} has {len(rows[-1])} pixels, expected {meta['width']}", offset)
    end = _byte_length(text)
    if meta is None:
        raise FileFormatError("Missing '# width=... height=...' metadata line", 0)
    try:
        height = int(meta["height"])
        panel_id = int(meta.get("panel_id", 0))
        exposure = float(meta.get("exposure_min", 10.0))
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"Bad frame metadata: {exc}", 0) from None
    if len(rows) != height:
        raise FileFormatError(f"Truncated frame: expected {height} rows, found {len(rows)}", end)
    try:
        return Frame(pixels=np.asarray(rows), panel_id=panel_id, exposure=exposure)
    except ValueError as exc:
        raise FileFormatError(f"Invalid frame: {exc}", 0) from None


__all__ = [
    "BACKGROUND_HEADER",
    "DIFFERENCE_HEADER",
    "FIGURE2_HEADER",
    "FRAME_HEADER",
    "SPECTRUM_HEADER",
    "read_numeric_csv",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_figure2_csv",
    "write_difference_csv",
    "write_report",
    "read_report",
    "write_frame_binary",
    "read_frame_binary",
    "write_frame_csv",
    "read_frame_csv",
]
