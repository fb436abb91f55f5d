"""File formats: gaze CSVs, attribution maps, manifests, events, reports.

Gaze recordings are per-sample CSVs with header ``t_ms,x_deg,y_deg``
(monocular) or ``t_ms,x_left_deg,y_left_deg,x_right_deg,y_right_deg``
(binocular). Missing coordinates may be written as an empty field,
``NaN`` or ``.``; a missing x always implies a missing y and vice versa.

Attribution maps are accepted in two forms: a dense text matrix with a
short ``D=``/``L=`` header and one comma-separated row per channel, or a
sparse CSV with header ``channel,index,value`` covering the full grid.

Recordings and attributions round-trip exactly (shortest-repr floats);
event and report files serialize reals with 9 significant digits.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detect import GazeEvent
from .dissect import SubEvent
from .errors import AlignmentError, ConfigError, DataError, FormatError
from .influence import InfluenceResult
from .preprocess import VelocityWindow

MONO_COLUMNS = ("t_ms", "x_deg", "y_deg")
BINOCULAR_COLUMNS = ("t_ms", "x_left_deg", "y_left_deg", "x_right_deg", "y_right_deg")
MISSING_TOKENS = {"", ".", "nan"}


def fmt_exact(x) -> str:
    """Shortest decimal that parses back to the same float; NaN spelled out."""
    x = float(x)
    return "NaN" if math.isnan(x) else repr(x)


def fmt_sig9(x) -> str:
    """9-significant-digit rendering; NaN/None become the empty field."""
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else f"{x:.9g}"


def round9(x: float) -> float:
    """Round a float to 9 significant digits (for JSON documents)."""
    return float(f"{float(x):.9g}")


@dataclass
class GazeRecording:
    """Positional gaze samples at a fixed nominal sampling rate.

    ``eyes`` maps an eye label to its (x_deg, y_deg) arrays; missing
    samples are NaN in both coordinates. ``eye`` is "mono", "left" or
    "right" for monocular data and "binocular" when both eyes are held.
    """

    recording_id: str
    t_ms: np.ndarray
    eyes: dict
    eye: str = "mono"
    sampling_rate_hz: float = 1000.0
    source_meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.t_ms)

    def _single(self):
        if self.eye == "binocular":
            raise ConfigError("recording is binocular; select an eye first")
        return self.eyes[self.eye]

    @property
    def x_deg(self) -> np.ndarray:
        return self._single()[0]

    @property
    def y_deg(self) -> np.ndarray:
        return self._single()[1]


@dataclass
class AttributionMap:
    """Per-channel, per-step relevance values for one window."""

    window_id: str
    values: np.ndarray  # (D, L)
    target_label: str | None = None

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class ManifestEntry:
    recording: str
    attribution: str
    window_id: str


@dataclass
class RunManifest:
    """The evaluation set: which attribution file explains which window."""

    entries: list
    base_dir: Path
    config: str | None = None
    output_dir: str | None = None

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        return p if p.is_absolute() else self.base_dir / p


def _couple_missing(x: np.ndarray, y: np.ndarray):
    missing = ~(np.isfinite(x) & np.isfinite(y))
    x = x.copy()
    y = y.copy()
    x[missing] = np.nan
    y[missing] = np.nan
    return x, y


def _parse_coord(token: str) -> float:
    token = token.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        return math.nan  # unparseable coordinates become missing samples


def _check_monotone(t: np.ndarray, line_of_sample, path):
    if len(t) > 1:
        bad = np.flatnonzero(np.diff(t) <= 0)
        if len(bad):
            raise DataError(
                f"{path}: timestamps not strictly increasing at line "
                f"{line_of_sample(int(bad[0]) + 1)}"
            )


def load_gaze_csv(path, schema: dict | None = None) -> GazeRecording:
    """Load a gaze recording, normalizing missing-value encodings.

    ``schema`` optionally maps the logical column names to the file's
    actual header names. Blank lines are skipped and counted in
    ``source_meta['skipped_rows']``; no other row is ever dropped.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if not raw.strip():
        raise DataError(f"{path}: empty file")
    lines = raw.splitlines()
    header = next(csv.reader([lines[0]]))
    header = [h.strip() for h in header]

    schema = schema or {}
    for logical in schema:
        if logical not in MONO_COLUMNS and logical not in BINOCULAR_COLUMNS:
            raise ConfigError(f"unknown logical column {logical!r} in schema")

    def col(logical):
        name = schema.get(logical, logical)
        if name not in header:
            return None
        return header.index(name)

    if all(col(c) is not None for c in BINOCULAR_COLUMNS):
        columns = BINOCULAR_COLUMNS
        eye = "binocular"
    elif all(col(c) is not None for c in MONO_COLUMNS):
        columns = MONO_COLUMNS
        eye = "mono"
    else:
        raise FormatError(
            f"{path}: header {header!r} matches neither the monocular nor "
            f"the binocular gaze schema"
        )
    idx = [col(c) for c in columns]

    body = lines[1:]
    kept_lines = []  # 1-based file line numbers of parsed samples
    rows = []
    skipped = 0
    for lineno, line in enumerate(body, start=2):
        if not line.strip():
            skipped += 1
            continue
        fields = next(csv.reader([line]))
        if len(fields) < len(header):
            raise FormatError(
                f"{path}: line {lineno} has {len(fields)} fields, expected {len(header)}"
            )
        try:
            t = int(fields[idx[0]].strip())
        except ValueError:
            raise DataError(
                f"{path}: line {lineno}: timestamp {fields[idx[0]]!r} is not an integer"
            ) from None
        rows.append((t, [_parse_coord(fields[i]) for i in idx[1:]]))
        kept_lines.append(lineno)

    t = np.array([r[0] for r in rows], dtype=np.int64)
    coords = np.array([r[1] for r in rows], dtype=float).reshape(len(rows), -1)
    _check_monotone(t, lambda i: kept_lines[i], path)

    if eye == "mono":
        x, y = _couple_missing(coords[:, 0], coords[:, 1])
        eyes = {"mono": (x, y)}
    else:
        xl, yl = _couple_missing(coords[:, 0], coords[:, 1])
        xr, yr = _couple_missing(coords[:, 2], coords[:, 3])
        eyes = {"left": (xl, yl), "right": (xr, yr)}
    return GazeRecording(
        recording_id=path.stem,
        t_ms=t,
        eyes=eyes,
        eye=eye,
        source_meta={"path": str(path), "skipped_rows": str(skipped)},
    )


def write_gaze_csv(rec: GazeRecording, path):
    """Write a recording; floats use exact round-trip formatting."""
    path = Path(path)
    out = []
    if rec.eye == "binocular":
        out.append(",".join(BINOCULAR_COLUMNS))
        xl, yl = rec.eyes["left"]
        xr, yr = rec.eyes["right"]
        for i in range(rec.n_samples):
            out.append(
                f"{rec.t_ms[i]},{fmt_exact(xl[i])},{fmt_exact(yl[i])},"
                f"{fmt_exact(xr[i])},{fmt_exact(yr[i])}"
            )
    else:
        out.append(",".join(MONO_COLUMNS))
        x, y = rec.x_deg, rec.y_deg
        for i in range(rec.n_samples):
            out.append(f"{rec.t_ms[i]},{fmt_exact(x[i])},{fmt_exact(y[i])}")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def select_eye(rec: GazeRecording, eye: str = "right") -> GazeRecording:
    """Reduce a recording to one eye (right by default for binocular data)."""
    if rec.eye == "binocular":
        if eye not in rec.eyes:
            raise ConfigError(
                f"recording {rec.recording_id!r} has eyes {sorted(rec.eyes)}, "
                f"requested {eye!r}"
            )
        return GazeRecording(
            recording_id=rec.recording_id,
            t_ms=rec.t_ms,
            eyes={eye: rec.eyes[eye]},
            eye=eye,
            sampling_rate_hz=rec.sampling_rate_hz,
            source_meta=dict(rec.source_meta),
        )
    if eye == "mono" or eye == rec.eye:
        return rec
    raise ConfigError(
        f"recording {rec.recording_id!r} is monocular ({rec.eye}); "
        f"requested {eye!r}"
    )


def load_manifest(path) -> RunManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "entries" not in doc:
        raise FormatError(f"{path}: manifest must be an object with 'entries'")
    entries = []
    seen = set()
    for i, e in enumerate(doc["entries"]):
        missing = {"recording", "attribution", "window_id"} - set(e)
        if missing:
            raise FormatError(f"{path}: entry {i} missing fields {sorted(missing)}")
        if e["window_id"] in seen:
            raise DataError(f"{path}: duplicate window_id {e['window_id']!r}")
        seen.add(e["window_id"])
        entries.append(ManifestEntry(e["recording"], e["attribution"], e["window_id"]))
    return RunManifest(
        entries=entries,
        base_dir=path.parent,
        config=doc.get("config"),
        output_dir=doc.get("output_dir"),
    )


def write_manifest(manifest: RunManifest, path):
    doc = {
        "output_dir": manifest.output_dir,
        "config": manifest.config,
        "entries": [
            {"recording": e.recording, "attribution": e.attribution, "window_id": e.window_id}
            for e in manifest.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _require_finite(values: np.ndarray, path):
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        ch, i = bad[0]
        raise DataError(f"{path}: non-finite attribution value at channel {ch}, index {i}")


def load_attribution(path, window_id: str | None = None) -> AttributionMap:
    """Load one attribution file (dense or sparse form)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty attribution file")

    if lines[0].startswith("D="):
        try:
            d = int(lines[0][2:])
            l = int(lines[1][2:]) if lines[1].startswith("L=") else None
        except (ValueError, IndexError):
            raise FormatError(f"{path}: malformed dense header") from None
        if l is None:
            raise FormatError(f"{path}: dense header must declare D= then L=")
        body = lines[2:]
        target = None
        if body and body[0].startswith("target="):
            target = body[0][len("target="):]
            body = body[1:]
        if len(body) != d:
            raise FormatError(f"{path}: expected {d} channel rows, found {len(body)}")
        values = np.empty((d, l), dtype=float)
        for ch, row in enumerate(body):
            try:
                vals = np.fromiter((float(tok) for tok in row.split(",")), dtype=float)
            except ValueError:
                raise FormatError(f"{path}: channel {ch} has a non-numeric value") from None
            if len(vals) != l:
                raise FormatError(
                    f"{path}: channel {ch} has {len(vals)} values, declared L={l}"
                )
            values[ch] = vals
    elif lines[0].replace(" ", "") == "channel,index,value":
        chs, idxs, vals = [], [], []
        for lineno, line in enumerate(lines[1:], start=2):
            fields = line.split(",")
            if len(fields) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 fields")
            chs.append(int(fields[0]))
            idxs.append(int(fields[1]))
            vals.append(float(fields[2]))
        d = max(chs) + 1
        l = max(idxs) + 1
        if len(lines) - 1 != d * l:
            raise FormatError(
                f"{path}: sparse file covers {len(lines) - 1} cells, grid needs {d * l}"
            )
        values = np.full((d, l), np.nan)
        values[chs, idxs] = vals
        target = None
    else:
        raise FormatError(
            f"{path}: expected a dense 'D='/'L=' header or a 'channel,index,value' header"
        )

    _require_finite(values, path)
    wid = window_id if window_id is not None else path.stem
    return AttributionMap(window_id=wid, values=values, target_label=target)


def write_attribution(attr: AttributionMap, path):
    """Write an attribution map in the dense text form (exact floats)."""
    path = Path(path)
    out = [f"D={attr.channels}", f"L={attr.length}"]
    if attr.target_label is not None:
        out.append(f"target={attr.target_label}")
    for ch in range(attr.channels):
        out.append(",".join(fmt_exact(v) for v in attr.values[ch]))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def load_attributions(manifest: RunManifest) -> list:
    """Load every attribution referenced by a manifest, in manifest order."""
    return [
        load_attribution(manifest.resolve(e.attribution), window_id=e.window_id)
        for e in manifest.entries
    ]


def validate_attribution(attr: AttributionMap, window):
    """Check that an attribution's shape matches its window exactly."""
    if attr.length != window.length or attr.channels != 2:
        raise AlignmentError(
            f"attribution for window {attr.window_id!r} has shape "
            f"({attr.channels}, {attr.length}), window needs (2, {window.length})"
        )


WINDOW_COLUMNS = (
    "window_id,recording_id,start_index,sampling_rate_hz,idx,vx,vy,px,py,valid"
)


def write_windows(windows, path):
    """Long-form CSV of velocity windows (exact floats, staged-CLI food)."""
    path = Path(path)
    rows = [WINDOW_COLUMNS]
    for w in windows:
        head = f"{w.window_id},{w.recording_id},{w.start_index},{fmt_exact(w.sampling_rate_hz)}"
        for i in range(w.length):
            rows.append(
                f"{head},{i},{fmt_exact(w.vx[i])},{fmt_exact(w.vy[i])},"
                f"{fmt_exact(w.px[i])},{fmt_exact(w.py[i])},"
                f"{'1' if w.valid_mask[i] else '0'}"
            )
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_windows(path) -> list:
    path = Path(path)
    windows = []
    current = None

    def flush():
        if current is None:
            return
        wid, rid, start, fs, cols = current
        windows.append(
            VelocityWindow(
                window_id=wid,
                recording_id=rid,
                start_index=start,
                vx=np.array(cols[0]),
                vy=np.array(cols[1]),
                px=np.array(cols[2]),
                py=np.array(cols[3]),
                valid_mask=np.array(cols[4], dtype=bool),
                sampling_rate_hz=fs,
            )
        )

    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != WINDOW_COLUMNS.split(","):
            raise FormatError(f"{path}: unexpected windows file header")
        for row in reader:
            wid = row[0]
            if current is None or current[0] != wid:
                flush()
                current = (wid, row[1], int(row[2]), float(row[3]), [[], [], [], [], []])
            cols = current[4]
            cols[0].append(_parse_coord(row[5]))
            cols[1].append(_parse_coord(row[6]))
            cols[2].append(_parse_coord(row[7]))
            cols[3].append(_parse_coord(row[8]))
            cols[4].append(row[9] == "1")
        flush()
    return windows


EVENT_COLUMNS = (
    "event_id,window_id,kind,onset,offset,duration_ms,peak_velocity,"
    "amplitude_deg,dispersion_deg,velocity_std,excluded,exclusion_reason"
)


def write_events(events, path):
    """Write events sorted by (window_id, onset, kind); reals at 9 digits."""
    path = Path(path)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS.split(","))
    for e in sorted(events, key=lambda e: (e.window_id, e.onset, e.kind, e.event_id)):
        writer.writerow(
            [
                e.event_id,
                e.window_id,
                e.kind,
                e.onset,
                e.offset,
                fmt_sig9(e.duration_ms),
                fmt_sig9(e.peak_velocity),
                fmt_sig9(e.amplitude_deg),
                fmt_sig9(e.dispersion_deg),
                fmt_sig9(e.velocity_std),
                "true" if e.excluded else "false",
                e.exclusion_reason,
            ]
        )
    path.write_text(buf.getvalue(), encoding="utf-8")


def _opt_float(token: str) -> float:
    return float(token) if token else math.nan


def read_events(path) -> list:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_COLUMNS.split(","):
            raise FormatError(f"{path}: unexpected event file header")
        events = []
        for row in reader:
            events.append(
                GazeEvent(
                    event_id=row[0],
                    window_id=row[1],
                    kind=row[2],
                    onset=int(row[3]),
                    offset=int(row[4]),
                    duration_ms=_opt_float(row[5]),
                    peak_velocity=_opt_float(row[6]),
                    amplitude_deg=_opt_float(row[7]),
                    dispersion_deg=_opt_float(row[8]),
                    velocity_std=_opt_float(row[9]),
                    excluded=row[10] == "true",
                    exclusion_reason=row[11],
                )
            )
    return events


SUBEVENT_COLUMNS = "parent_event_id,window_id,phase,onset,offset"
_PHASE_ORDER = {p: i for i, p in enumerate(("pre", "rise", "peak", "fall", "post"))}


def write_subevents(sub_events, path):
    """Write phase segments; window_id is recovered from the parent id."""
    path = Path(path)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUBEVENT_COLUMNS.split(","))
    def key(s):
        return (s.parent_event_id.rsplit(":", 1)[0], s.parent_event_id,
                _PHASE_ORDER.get(s.phase, 9), s.onset)
    for s in sorted(sub_events, key=key):
        writer.writerow(
            [s.parent_event_id, s.parent_event_id.rsplit(":", 1)[0], s.phase, s.onset, s.offset]
        )
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_subevents(path) -> list:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SUBEVENT_COLUMNS.split(","):
            raise FormatError(f"{path}: unexpected sub-event file header")
        return [SubEvent(row[0], row[2], int(row[3]), int(row[4])) for row in reader]


REPORT_COLUMNS = (
    "concept,scope,window_id,L_total,S_total,k_total,intersection,c,c_mean,"
    "n_windows,n_skipped"
)


def _result_key(r: InfluenceResult):
    return (r.concept, r.scope, r.window_id)


def write_report(results, path, format: str = "csv"):
    """Write influence results as CSV or JSON, deterministically ordered."""
    path = Path(path)
    results = sorted(results, key=_result_key)
    if format == "csv":
        buf = _io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS.split(","))
        for r in results:
            writer.writerow(
                [
                    r.concept,
                    r.scope,
                    r.window_id,
                    r.L_total,
                    r.S_total,
                    r.k_total,
                    r.intersection,
                    fmt_sig9(r.c),
                    fmt_sig9(r.c_mean),
                    r.n_windows,
                    r.n_skipped,
                ]
            )
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif format == "json":
        doc = [
            {
                "concept": r.concept,
                "scope": r.scope,
                "window_id": r.window_id,
                "L_total": r.L_total,
                "S_total": r.S_total,
                "k_total": r.k_total,
                "intersection": r.intersection,
                "c": round9(r.c),
                "c_mean": None if r.c_mean is None else round9(r.c_mean),
                "n_windows": r.n_windows,
                "n_skipped": r.n_skipped,
            }
            for r in results
        ]
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        raise ConfigError(f"unknown report format {format!r}")


def read_report(path, format: str = "csv") -> list:
    path = Path(path)
    results = []
    if format == "csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != REPORT_COLUMNS.split(","):
                raise FormatError(f"{path}: unexpected report header")
            for row in reader:
                results.append(
                    InfluenceResult(
                        concept=row[0],
                        scope=row[1],
                        window_id=row[2],
                        L_total=int(row[3]),
                        S_total=int(row[4]),
                        k_total=int(row[5]),
                        intersection=int(row[6]),
                        c=float(row[7]),
                        c_mean=float(row[8]) if row[8] else None,
                        n_windows=int(row[9]),
                        n_skipped=int(row[10]),
                    )
                )
    elif format == "json":
        for r in json.loads(path.read_text(encoding="utf-8")):
            results.append(InfluenceResult(**r))
    else:
        raise ConfigError(f"unknown report format {format!r}")
    return results
