"""File formats.

* Year event table: little-endian binary.  Header ``b"ARA1"``, format
  version (u16), catalogue size (u64), trial count (u64); then per trial the
  trial id (u64) and occurrence count (u32) followed by that many
  ``(event_id u32, timestamp f64, z_prog_e f64)`` records.
* XELT: CSV with header ``event_id,mean_loss,sigma_i,sigma_c,max_loss,z_e``.
  Floats are written in shortest round-trip form.
* Portfolio: JSON document holding layer terms, ELT terms and relative
  paths to the XELT files.
* Year loss table: CSV ``program,layer,trial_id,loss`` with six decimals.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
import struct
from typing import Optional

import numpy as np

from .model import EltTerms, Layer, LayerTerms, Portfolio, Program, Xelt, YearEventTable, YearLossTable

YET_MAGIC = b"ARA1"
YET_VERSION = 1
PORTFOLIO_VERSION = 1

_YET_HEADER = struct.Struct("<4sHQQ")
_TRIAL_HEADER = struct.Struct("<QI")
_OCC_DTYPE = np.dtype([("event_id", "<u4"), ("timestamp", "<f8"), ("z_prog_e", "<f8")])

XELT_HEADER = "event_id,mean_loss,sigma_i,sigma_c,max_loss,z_e"
YLT_HEADER = "program,layer,trial_id,loss"


class FormatError(ValueError):
    """A file exists but does not match its expected format."""


# ---------------------------------------------------------------------------
# YET
# ---------------------------------------------------------------------------


def yet_to_bytes(yet: YearEventTable) -> bytes:
    if yet.event_ids.size and yet.event_ids.max() >= 2**32:
        raise ValueError("event ids do not fit the u32 YET record")
    occ = np.empty(yet.event_ids.size, dtype=_OCC_DTYPE)
    occ["event_id"] = yet.event_ids
    occ["timestamp"] = yet.timestamps
    occ["z_prog_e"] = yet.z_prog_e
    parts = [_YET_HEADER.pack(YET_MAGIC, YET_VERSION, yet.catalogue_size, yet.num_trials)]
    off = yet.offsets
    for i in range(yet.num_trials):
        lo, hi = int(off[i]), int(off[i + 1])
        parts.append(_TRIAL_HEADER.pack(i, hi - lo))
        parts.append(occ[lo:hi].tobytes())
    return b"".join(parts)


def yet_from_bytes(buf: bytes) -> YearEventTable:
    if len(buf) < _YET_HEADER.size:
        raise FormatError("YET file is shorter than its header")
    magic, version, catalogue_size, n_trials = _YET_HEADER.unpack_from(buf, 0)
    if magic != YET_MAGIC:
        raise FormatError(f"bad YET magic {magic!r}")
    if version != YET_VERSION:
        raise FormatError(f"unsupported YET format version {version}")
    pos = _YET_HEADER.size
    offsets = np.zeros(n_trials + 1, dtype=np.int64)
    chunks = []
    rec = _OCC_DTYPE.itemsize
    for i in range(n_trials):
        if pos + _TRIAL_HEADER.size > len(buf):
            raise FormatError(f"YET truncated in the header of trial {i}")
        trial_id, count = _TRIAL_HEADER.unpack_from(buf, pos)
        if trial_id != i:
            raise FormatError(f"trial ids must be contiguous; expected {i}, found {trial_id}")
        pos += _TRIAL_HEADER.size
        end = pos + count * rec
        if end > len(buf):
            raise FormatError(f"YET truncated inside trial {i}")
        chunks.append(np.frombuffer(buf, dtype=_OCC_DTYPE, count=count, offset=pos))
        offsets[i + 1] = offsets[i] + count
        pos = end
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after the last trial")
    occ = np.concatenate(chunks) if chunks else np.empty(0, dtype=_OCC_DTYPE)
    try:
        return YearEventTable(offsets, occ["event_id"].astype(np.int64), occ["timestamp"],
                              occ["z_prog_e"], catalogue_size)
    except ValueError as exc:
        raise FormatError(f"YET content is invalid: {exc}") from exc


def write_yet(yet: YearEventTable, path) -> int:
    data = yet_to_bytes(yet)
    Path(path).write_bytes(data)
    return len(data)


def read_yet(path) -> YearEventTable:
    return yet_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# XELT
# ---------------------------------------------------------------------------


def write_xelt(xelt: Xelt, path) -> int:
    lines = [XELT_HEADER]
    for row in zip(xelt.event_id.tolist(), xelt.mean_loss.tolist(), xelt.sigma_i.tolist(),
                   xelt.sigma_c.tolist(), xelt.max_loss.tolist(), xelt.z_e.tolist()):
        lines.append(",".join([str(row[0])] + [repr(v) for v in row[1:]]))
    text = "\n".join(lines) + "\n"
    Path(path).write_text(text, encoding="ascii", newline="\n")
    return len(text)


def read_xelt(path, terms: EltTerms = EltTerms()) -> Xelt:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != XELT_HEADER:
            raise FormatError(f"{path}: expected header {XELT_HEADER!r}")
        cols = [[] for _ in range(6)]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                cols[0].append(int(row[0]))
                for c in range(1, 6):
                    cols[c].append(float(row[c]))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    try:
        return Xelt(*cols, terms=terms)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Portfolio
# ---------------------------------------------------------------------------


def _layer_terms_dict(t: LayerTerms) -> dict:
    return {"occ_retention": t.occ_retention, "occ_limit": t.occ_limit,
            "agg_retention": t.agg_retention, "agg_limit": t.agg_limit}


def write_portfolio(portfolio: Portfolio, directory, catalogue_size: int,
                    generator: Optional[dict] = None, name: str = "portfolio.json") -> list[Path]:
    """Write the portfolio JSON plus one CSV per XELT; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    doc = {"format_version": PORTFOLIO_VERSION, "catalogue_size": int(catalogue_size)}
    if generator is not None:
        doc["generator"] = generator
    programs = []
    for p, prog in enumerate(portfolio.programs):
        layers = []
        for l, layer in enumerate(prog.layers):
            xelts = []
            for j, x in enumerate(layer.xelts):
                fname = f"xelt_p{p}_l{l}_x{j}.csv"
                write_xelt(x, directory / fname)
                written.append(directory / fname)
                xelts.append({"path": fname,
                              "terms": {"retention": x.terms.retention, "limit": x.terms.limit}})
            layers.append({"terms": _layer_terms_dict(layer.terms), "xelts": xelts})
        programs.append({"layers": layers})
    doc["programs"] = programs
    target = directory / name
    target.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")
    written.append(target)
    return written


def read_portfolio(path) -> tuple[Portfolio, dict]:
    """Load a portfolio document; returns the portfolio and the raw document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if doc.get("format_version") != PORTFOLIO_VERSION:
        raise FormatError(f"{path}: unsupported portfolio format version {doc.get('format_version')}")
    try:
        programs = []
        for prog in doc["programs"]:
            layers = []
            for layer in prog["layers"]:
                xelts = [read_xelt(path.parent / x["path"], EltTerms(**x["terms"]))
                         for x in layer["xelts"]]
                layers.append(Layer(tuple(xelts), LayerTerms(**layer["terms"])))
            programs.append(Program(tuple(layers)))
        return Portfolio(tuple(programs)), doc
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed portfolio document ({exc!r})") from exc
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# YLT
# ---------------------------------------------------------------------------


def write_ylt(ylt: YearLossTable, path) -> int:
    lines = [YLT_HEADER]
    lines.extend(
        f"{p},{l},{t},{x:.6f}"
        for p, l, t, x in zip(ylt.program.tolist(), ylt.layer.tolist(), ylt.trial_id.tolist(),
                              ylt.loss.tolist())
    )
    text = "\n".join(lines) + "\n"
    Path(path).write_text(text, encoding="ascii", newline="\n")
    return len(text)


def read_ylt(path) -> YearLossTable:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != YLT_HEADER:
            raise FormatError(f"{path}: expected header {YLT_HEADER!r}")
        rows = [line.split(",") for line in fh if line.strip()]
    if any(len(r) != 4 for r in rows):
        raise FormatError(f"{path}: every row needs 4 fields")
    try:
        cols = list(zip(*rows)) if rows else [(), (), (), ()]
        return YearLossTable(
            np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.int64),
            np.array(cols[2], dtype=np.int64), np.array(cols[3], dtype=np.float64),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
