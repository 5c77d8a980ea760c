"""Histogram CSV and fit-report JSON formats.

Histogram CSV::

    # unit: ns
    # bin_width: 1.0
    tau,count
    -1.5,0
    ...

Both comment lines are optional; without ``bin_width`` the spacing of the
first two rows is used. Floats are written with ``repr`` so files round-trip
exactly. All writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import FormatError, ValidationError
from .models import DelayGrid, ModelSpec, ParamSpec, PulsedEmitterSpec, ThermalSumSpec
from .objectives import Histogram

SCHEMA_VERSION = 1
_INT_RE = re.compile(r"^[+-]?\d+$")

PathLike = Union[str, os.PathLike]


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# histogram CSV
# ---------------------------------------------------------------------------


def format_histogram(hist: Histogram, unit: Optional[str] = None) -> str:
    lines = []
    if unit:
        lines.append(f"# unit: {unit}")
    lines.append(f"# bin_width: {hist.grid.bin_width!r}")
    lines.append("tau,count")
    lines += [f"{t!r},{int(c)}" for t, c in zip(hist.tau.tolist(), hist.counts.tolist())]
    return "\n".join(lines) + "\n"


def write_histogram(path: PathLike, hist: Histogram, unit: Optional[str] = None) -> None:
    atomic_write_text(path, format_histogram(hist, unit))


def read_histogram(path: PathLike, return_unit: bool = False):
    """Parse a histogram CSV. Row numbers in errors count data rows from 1."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    unit = None
    bin_width = None
    tau, counts = [], []
    header_seen = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip().lower()
            if key == "unit":
                unit = value.strip()
            elif key == "bin_width":
                try:
                    bin_width = float(value)
                except ValueError:
                    raise FormatError(f"bad bin_width comment: {line!r}") from None
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen and not tau and [f.lower() for f in fields] == ["tau", "count"]:
            header_seen = True
            continue
        row = len(tau) + 1
        if len(fields) != 2:
            raise FormatError(f"row {row}: expected 2 fields, got {len(fields)}")
        try:
            t = float(fields[0])
        except ValueError:
            raise FormatError(f"row {row}: tau {fields[0]!r} is not a number") from None
        if not math.isfinite(t):
            raise FormatError(f"row {row}: tau must be finite")
        c = fields[1]
        if not _INT_RE.match(c):
            try:
                float(c)
            except ValueError:
                raise FormatError(f"row {row}: count {c!r} is not a number") from None
            raise FormatError(f"row {row}: fractional count {c!r}")
        c = int(c)
        if c < 0:
            raise FormatError(f"row {row}: negative count {c}")
        tau.append(t)
        counts.append(c)
    if not tau:
        raise FormatError(f"{path}: no data rows")
    tau = np.array(tau)
    if bin_width is None:
        if tau.size < 2:
            raise FormatError("single-row histogram needs a '# bin_width:' comment")
        bin_width = tau[1] - tau[0]
    if tau.size > 1:
        d = np.diff(tau)
        bad = np.flatnonzero((d <= 0) | (np.abs(d - bin_width) > 1e-9 * abs(bin_width)))
        if bad.size:
            raise FormatError(f"row {bad[0] + 2}: non-uniform delay grid (step {d[bad[0]]!r}, expected {bin_width!r})")
    try:
        hist = Histogram(DelayGrid(tau, bin_width), np.array(counts, dtype=np.int64))
    except ValidationError as exc:
        raise FormatError(str(exc)) from None
    return (hist, unit) if return_unit else hist


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def write_json(path: PathLike, obj) -> None:
    atomic_write_text(path, dumps(obj))


def read_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON from {path}: {exc}") from None


def spec_to_dict(spec: ModelSpec) -> dict:
    v = spec.variant
    out = {"kind": spec.kind, "fixed_background": v.fixed_background}
    if spec.kind == "pulsed":
        out["n_side_pulses"] = v.n_side_pulses
    else:
        out["num_gaussians"] = v.num_gaussians
    out["layout"] = [
        {"name": p.name, "lower": p.lower, "upper": p.upper, "regularized": p.regularized, "log_scale": p.log_scale}
        for p in spec.layout
    ]
    return out


def spec_from_dict(d: dict) -> ModelSpec:
    try:
        bg = d.get("fixed_background")
        if d["kind"] == "pulsed":
            variant = PulsedEmitterSpec(int(d["n_side_pulses"]), bg)
        elif d["kind"] == "thermal":
            variant = ThermalSumSpec(int(d["num_gaussians"]), bg)
        else:
            raise FormatError(f"unknown model kind {d['kind']!r}")
        layout = tuple(ParamSpec(p["name"], float(p["lower"]), float(p["upper"]), bool(p["regularized"]),
                                 bool(p.get("log_scale", False))) for p in d["layout"])
    except KeyError as exc:
        raise FormatError(f"model block missing field {exc.args[0]!r}") from None
    return ModelSpec(variant, layout)


def grid_from_dict(d: dict) -> DelayGrid:
    """Grid from ``{"tau": [...], "bin_width": w}`` or ``{"n_bins": n, "bin_width": w}``."""
    try:
        if "tau" in d:
            return DelayGrid(np.asarray(d["tau"], dtype=float), float(d["bin_width"]))
        return DelayGrid.centered(int(d["n_bins"]), float(d["bin_width"]))
    except KeyError as exc:
        raise FormatError(f"grid block missing field {exc.args[0]!r}") from None


def read_fit_report(path: PathLike) -> dict:
    report = read_json(path)
    if report.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported fit report schema_version {report.get('schema_version')!r}")
    for key in ("model", "theta_hat", "objective", "curve", "grid"):
        if key not in report:
            raise FormatError(f"fit report missing {key!r}")
    return report


def write_fit_report(path: PathLike, report: dict) -> None:
    write_json(path, report)
