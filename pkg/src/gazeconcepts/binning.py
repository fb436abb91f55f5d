"""Partition events by a property and compute per-bin concept influence.

Supported properties are saccade duration and amplitude, and fixation
dispersion and velocity standard deviation. Bins are half-open (lo, hi];
values at or below the first edge fall into a reported underflow bin,
values above the last edge into an overflow bin.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detect import FIXATION, SACCADE
from .errors import ConfigError, EmptyConceptError
from .influence import (
    InfluenceResult,
    aggregate_influence,
    concept_influence,
    concept_segmentation,
)

PROPERTIES = {
    "saccade_duration_ms": (SACCADE, "duration_ms"),
    "saccade_amplitude_deg": (SACCADE, "amplitude_deg"),
    "fixation_dispersion_deg": (FIXATION, "dispersion_deg"),
    "fixation_velocity_std": (FIXATION, "velocity_std"),
}

UNDERFLOW = "underflow"
OVERFLOW = "overflow"


@dataclass(frozen=True)
class BinSpec:
    """Binning request: explicit edges, or equal-width/quantile over data."""

    property: str
    mode: str = "width"  # "width" | "quantile" | "explicit"
    n_bins: int = 20
    edges: tuple = ()

    def validate(self):
        if self.property not in PROPERTIES:
            raise ConfigError(
                f"unknown property {self.property!r}; expected one of {sorted(PROPERTIES)}"
            )
        if self.mode not in ("width", "quantile", "explicit"):
            raise ConfigError(f"unknown bin mode {self.mode!r}")
        if self.mode == "explicit":
            if len(self.edges) < 2:
                raise ConfigError("explicit binning needs at least 2 edges")
            if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
                raise ConfigError("edges must be strictly increasing")
        elif self.n_bins < 1:
            raise ConfigError(f"n_bins must be >= 1, got {self.n_bins}")


@dataclass
class Bin:
    lo: float
    hi: float
    label: str = "bin"  # "bin" | "underflow" | "overflow"
    events: list = field(default_factory=list)

    @property
    def event_count(self) -> int:
        return len(self.events)


@dataclass
class BinnedInfluence:
    property: str
    lo: float
    hi: float
    label: str
    event_count: int
    segmentation_size: int
    influence: InfluenceResult | None  # None when the bin is empty


def property_values(events, prop: str) -> np.ndarray:
    kind, attr = PROPERTIES[prop]
    bad = [e for e in events if e.kind != kind]
    if bad:
        raise ConfigError(
            f"property {prop!r} applies to {kind} events, got {bad[0].kind}"
        )
    return np.array([getattr(e, attr) for e in events], dtype=float)


def resolve_edges(spec: BinSpec, events, validity_range=None) -> list[float]:
    """Concrete strictly-increasing edges for a spec.

    Width mode spans the validity range when one is supplied, else the
    data range; quantile mode uses evenly spaced quantiles of the data.
    """
    spec.validate()
    if spec.mode == "explicit":
        return list(spec.edges)
    values = property_values(events, spec.property)
    values = values[np.isfinite(values)]
    if len(values) == 0:
        raise ConfigError(f"no finite {spec.property} values to derive edges from")
    if spec.mode == "width":
        lo, hi = validity_range or (float(values.min()), float(values.max()))
        if not lo < hi:
            hi = lo + 1.0
        return list(np.linspace(lo, hi, spec.n_bins + 1))
    qs = np.quantile(values, np.linspace(0.0, 1.0, spec.n_bins + 1))
    edges = [float(qs[0])]
    for q in qs[1:]:
        if q > edges[-1]:
            edges.append(float(q))
    if len(edges) < 2:
        raise ConfigError("quantile edges collapsed; property values are constant")
    return edges


def bin_events(events, spec: BinSpec, edges=None, validity_range=None) -> list[Bin]:
    """Assign events to (lo, hi] bins plus underflow/overflow.

    Events with a NaN property value are left out entirely (they have no
    property to bin on); everything else lands in exactly one bin.
    """
    if edges is None:
        edges = resolve_edges(spec, events, validity_range)
    bins = [Bin(lo, hi) for lo, hi in zip(edges, edges[1:])]
    under = Bin(-math.inf, edges[0], UNDERFLOW)
    over = Bin(edges[-1], math.inf, OVERFLOW)
    values = property_values(events, spec.property)
    for event, value in zip(events, values):
        if not np.isfinite(value):
            continue
        idx = bisect.bisect_left(edges, value)
        if idx == 0:
            under.events.append(event)
        elif idx == len(edges):
            over.events.append(event)
        else:
            bins[idx - 1].events.append(event)
    return [under] + bins + [over]


BINNED_COLUMNS = (
    "property,label,lo,hi,event_count,segmentation_size,intersection,c,c_mean"
)


def _fmt_sig9(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else f"{x:.9g}"


def write_binned(binned_by_property: dict, path):
    """Per-bin influence table as CSV (empty bins keep empty cells)."""
    rows = [BINNED_COLUMNS]
    for prop in sorted(binned_by_property):
        for b in binned_by_property[prop]:
            inf = b.influence
            rows.append(
                ",".join(
                    [
                        b.property,
                        b.label,
                        _fmt_sig9(b.lo) if math.isfinite(b.lo) else "",
                        _fmt_sig9(b.hi) if math.isfinite(b.hi) else "",
                        str(b.event_count),
                        str(b.segmentation_size),
                        str(inf.intersection) if inf else "",
                        _fmt_sig9(inf.c) if inf else "",
                        _fmt_sig9(inf.c_mean) if inf else "",
                    ]
                )
            )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_binned(path) -> dict:
    """Inverse of write_binned, for staged CLI use and round-trip tests."""
    out = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != BINNED_COLUMNS.split(","):
            raise ConfigError(f"{path}: unexpected binned table header")
        for row in reader:
            prop, label = row[0], row[1]
            lo = float(row[2]) if row[2] else -math.inf
            hi = float(row[3]) if row[3] else math.inf
            influence = None
            if row[6]:
                influence = InfluenceResult(
                    concept=prop,
                    scope="corpus",
                    intersection=int(row[6]),
                    c=float(row[7]),
                    L_total=0,
                    S_total=int(row[5]),
                    k_total=0,
                    c_mean=float(row[8]) if row[8] else None,
                )
            out.setdefault(prop, []).append(
                BinnedInfluence(
                    property=prop,
                    lo=lo,
                    hi=hi,
                    label=label,
                    event_count=int(row[4]),
                    segmentation_size=int(row[5]),
                    influence=influence,
                )
            )
    return out


def binned_influence(bins, spec: BinSpec, topk_by_window) -> list[BinnedInfluence]:
    """Aggregate concept influence per bin.

    Each bin's events form their own concept segmentation per window,
    evaluated against that window's top-k mask and pooled across
    windows exactly like an unbinned concept.
    """
    out = []
    for b in bins:
        by_window = {}
        for event in b.events:
            by_window.setdefault(event.window_id, []).append(event)
        results = []
        size = 0
        for window_id in sorted(by_window):
            topk = topk_by_window.get(window_id)
            if topk is None:
                raise ConfigError(f"no top-k segmentation for window {window_id!r}")
            seg = concept_segmentation(
                by_window[window_id], spec.property, topk.length, window_id
            )
            size += seg.size
            try:
                results.append(concept_influence(seg, topk))
            except EmptyConceptError:  # zero-length intervals cannot occur
                continue
        out.append(
            BinnedInfluence(
                property=spec.property,
                lo=b.lo,
                hi=b.hi,
                label=b.label,
                event_count=b.event_count,
                segmentation_size=size,
                influence=aggregate_influence(results) if results else None,
            )
        )
    return out
