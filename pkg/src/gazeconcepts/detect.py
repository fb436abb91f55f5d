"""Fixation and saccade detection on velocity windows.

Fixations come from a velocity-threshold pass (speed at or below a fixed
limit), saccades from the adaptive elliptic criterion of Engbert & Kliegl
(threshold = lambda times a median-based noise estimate per component).
The two detectors run independently; events violating the validity
bounds are kept but marked excluded so downstream stages can drop them
from evaluation while reports still account for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateDataError
from .preprocess import VelocityWindow

FIXATION = "fixation"
SACCADE = "saccade"


@dataclass(frozen=True)
class DetectionParams:
    """Detection thresholds; defaults follow standard published values."""

    fix_max_velocity: float = 20.0  # deg/s
    fix_min_duration_ms: float = 40.0
    fix_max_dispersion_deg: float = 2.7
    sacc_lambda: float = 6.0
    sacc_min_duration_ms: float = 9.0
    sacc_max_duration_ms: float = 100.0
    sacc_min_peak_velocity: float = 35.0  # deg/s
    sacc_max_peak_velocity: float = 1000.0
    eta_floor: float = 1e-6  # deg/s

    def validate(self):
        pairs = [
            ("sacc duration", self.sacc_min_duration_ms, self.sacc_max_duration_ms),
            ("sacc peak velocity", self.sacc_min_peak_velocity, self.sacc_max_peak_velocity),
        ]
        for name, lo, hi in pairs:
            if not lo < hi:
                raise ConfigError(f"{name}: min ({lo}) must be below max ({hi})")
        for name, value in (
            ("fix_max_velocity", self.fix_max_velocity),
            ("fix_min_duration_ms", self.fix_min_duration_ms),
            ("fix_max_dispersion_deg", self.fix_max_dispersion_deg),
            ("sacc_lambda", self.sacc_lambda),
            ("sacc_min_duration_ms", self.sacc_min_duration_ms),
            ("sacc_min_peak_velocity", self.sacc_min_peak_velocity),
            ("eta_floor", self.eta_floor),
        ):
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")


@dataclass
class GazeEvent:
    """A detected fixation or saccade as an inclusive sample interval.

    Properties that do not apply to the event kind (or could not be
    computed) are NaN. Excluded events carry the reason they failed the
    validity filters.
    """

    event_id: str
    kind: str
    window_id: str
    onset: int
    offset: int
    duration_ms: float = math.nan
    peak_velocity: float = math.nan
    amplitude_deg: float = math.nan
    dispersion_deg: float = math.nan
    velocity_std: float = math.nan
    excluded: bool = False
    exclusion_reason: str = ""

    @property
    def n_samples(self) -> int:
        return self.offset - self.onset + 1


def ek_noise_threshold(vx, vy, lam: float, eta_floor: float = 1e-6, valid=None):
    """Adaptive per-component saccade thresholds (eta_x, eta_y) in deg/s.

    Per component the noise scale is the median estimator
    sigma = sqrt(median(v^2) - median(v)^2) over valid samples, and the
    threshold is lambda * sigma, floored at eta_floor.
    """
    vx = np.asarray(vx, dtype=float)
    vy = np.asarray(vy, dtype=float)
    if valid is None:
        valid = np.isfinite(vx) & np.isfinite(vy)
    if int(valid.sum()) < 2:
        raise DegenerateDataError("need at least 2 valid samples for noise estimate")
    etas = []
    for v in (vx[valid], vy[valid]):
        med = np.median(v)
        var = np.median(v * v) - med * med
        sigma = math.sqrt(var) if var > 0 else 0.0
        etas.append(max(lam * sigma, eta_floor))
    return etas[0], etas[1]


def _runs(candidates: np.ndarray):
    """Maximal runs of consecutive True samples as (onset, offset) pairs."""
    padded = np.concatenate(([False], candidates, [False]))
    edges = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def compute_event_properties(event: GazeEvent, window: VelocityWindow) -> GazeEvent:
    """Fill in duration, peak velocity and kind-specific properties.

    Saccade amplitude is the onset-to-offset displacement; fixation
    dispersion is x-range plus y-range; fixation velocity_std is the
    population standard deviation of the speed magnitude. Events with no
    valid sample keep NaN properties.
    """
    if not (0 <= event.onset <= event.offset < window.length):
        raise ConfigError(
            f"event [{event.onset}, {event.offset}] outside window of length {window.length}"
        )
    sl = slice(event.onset, event.offset + 1)
    duration_ms = event.n_samples * 1000.0 / window.sampling_rate_hz
    valid = window.valid_mask[sl]
    if not valid.any():
        return replace(event, duration_ms=duration_ms)

    speed = np.hypot(window.vx[sl][valid], window.vy[sl][valid])
    updates = {"duration_ms": duration_ms, "peak_velocity": float(speed.max())}
    if event.kind == SACCADE:
        px, py = window.px[sl], window.py[sl]
        if np.isfinite(px[0]) and np.isfinite(px[-1]):
            updates["amplitude_deg"] = float(
                math.hypot(px[-1] - px[0], py[-1] - py[0])
            )
    elif event.kind == FIXATION:
        px = window.px[sl][valid]
        py = window.py[sl][valid]
        updates["dispersion_deg"] = float((px.max() - px.min()) + (py.max() - py.min()))
        updates["velocity_std"] = float(np.std(speed))
    return replace(event, **updates)


def _filter_saccade(event: GazeEvent, params: DetectionParams) -> GazeEvent:
    reasons = []
    if event.duration_ms < params.sacc_min_duration_ms:
        reasons.append("min duration")
    if event.duration_ms > params.sacc_max_duration_ms:
        reasons.append("max duration")
    if not event.peak_velocity >= params.sacc_min_peak_velocity:
        reasons.append("min peak velocity")
    if event.peak_velocity > params.sacc_max_peak_velocity:
        reasons.append("max peak velocity")
    if reasons:
        return replace(event, excluded=True, exclusion_reason="; ".join(reasons))
    return event


def _filter_fixation(event: GazeEvent, params: DetectionParams) -> GazeEvent:
    reasons = []
    if event.duration_ms < params.fix_min_duration_ms:
        reasons.append("min duration")
    if event.dispersion_deg > params.fix_max_dispersion_deg:
        reasons.append("max dispersion")
    if reasons:
        return replace(event, excluded=True, exclusion_reason="; ".join(reasons))
    return event


def detect_saccades_ek(window: VelocityWindow, params: DetectionParams) -> list[GazeEvent]:
    """Engbert-Kliegl saccade detection on one window.

    Candidate samples satisfy (vx/eta_x)^2 + (vy/eta_y)^2 > 1; missing
    samples are never candidates and break runs. Every maximal run
    becomes an event; runs violating the duration or peak-velocity
    bounds are marked excluded rather than dropped.
    """
    params.validate()
    eta_x, eta_y = ek_noise_threshold(
        window.vx, window.vy, params.sacc_lambda, params.eta_floor, window.valid_mask
    )
    with np.errstate(invalid="ignore"):
        crit = (window.vx / eta_x) ** 2 + (window.vy / eta_y) ** 2 > 1
    candidates = crit & window.valid_mask
    events = []
    for i, (onset, offset) in enumerate(_runs(candidates)):
        event = GazeEvent(
            event_id=f"{window.window_id}:sac{i:03d}",
            kind=SACCADE,
            window_id=window.window_id,
            onset=onset,
            offset=offset,
        )
        events.append(_filter_saccade(compute_event_properties(event, window), params))
    return events


def detect_fixations_ivt(window: VelocityWindow, params: DetectionParams) -> list[GazeEvent]:
    """I-VT fixation detection on one window.

    Candidate samples have speed at or below fix_max_velocity; maximal
    runs become fixations, and runs that are too short or too dispersed
    are marked excluded with the failed bound as reason.
    """
    params.validate()
    with np.errstate(invalid="ignore"):
        slow = window.speed() <= params.fix_max_velocity
    candidates = slow & window.valid_mask
    events = []
    for i, (onset, offset) in enumerate(_runs(candidates)):
        event = GazeEvent(
            event_id=f"{window.window_id}:fix{i:03d}",
            kind=FIXATION,
            window_id=window.window_id,
            onset=onset,
            offset=offset,
        )
        events.append(_filter_fixation(compute_event_properties(event, window), params))
    return events


def retained(events) -> list[GazeEvent]:
    """The events that survived the validity filters."""
    return [e for e in events if not e.excluded]
