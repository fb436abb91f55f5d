"""End-to-end orchestration: preprocess, detect, dissect, influence, bin,
report.

Per-window work is independent and may run on several threads; every
reduction happens in manifest order afterwards, so outputs are identical
for any --jobs value. All artifacts are written at the end of a run; if
that fails, partial files are removed and an INCOMPLETE marker is left.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import binning as binning_mod
from . import io as gio
from . import report as report_mod
from .detect import (
    FIXATION,
    SACCADE,
    DetectionParams,
    detect_fixations_ivt,
    detect_saccades_ek,
    retained,
)
from .dissect import PHASES, dissect_all
from .errors import AlignmentError, ConfigError, DataError, GazeError
from .influence import (
    aggregate_influence,
    concept_influence,
    concept_segmentation,
    default_k,
    squash_channels,
    topk_segmentation,
)
from .preprocess import (
    SavGolParams,
    clamp_velocities,
    compute_channel_stats,
    savgol_derivative,
    window_sequence,
    zscore_normalize,
)

EVENT_CONCEPTS = (FIXATION, SACCADE)
PHASE_CONCEPTS = tuple(f"saccade_{p}" for p in PHASES)
ALL_CONCEPTS = EVENT_CONCEPTS + PHASE_CONCEPTS

VALIDITY_RANGES = {
    "saccade_duration_ms": lambda cfg: (cfg.sacc_min_duration_ms, cfg.sacc_max_duration_ms),
    "saccade_amplitude_deg": lambda cfg: None,
    "fixation_dispersion_deg": lambda cfg: (0.0, cfg.fix_max_dispersion_deg),
    "fixation_velocity_std": lambda cfg: (0.0, cfg.fix_max_velocity),
}


@dataclass
class RunConfig:
    """Every tunable parameter of the pipeline, with its default."""

    # preprocess
    sg_window: int = 7
    sg_order: int = 2
    clamp: float = 1000.0
    window_len: int = 1000
    missing_max_frac: float = 0.5
    norm_scope: str = "corpus"  # corpus | recording | none
    eye: str = "right"  # eye picked from binocular recordings
    # detect
    fix_max_velocity: float = 20.0
    fix_min_duration_ms: float = 40.0
    fix_max_dispersion_deg: float = 2.7
    sacc_lambda: float = 6.0
    sacc_min_duration_ms: float = 9.0
    sacc_max_duration_ms: float = 100.0
    sacc_min_peak_velocity: float = 35.0
    sacc_max_peak_velocity: float = 1000.0
    eta_floor: float = 1e-6
    # dissect
    peak_ratio: float = 0.8
    flank_ratio: float = 1.0 / 3.0
    # influence
    top_frac: float = 0.02
    squash: str = "signed"  # signed | abs
    aggregate: str = "both"  # pooled | mean | both
    # binning
    bins: int = 20
    bin_mode: str = "width"  # width | quantile | explicit
    bin_edges: tuple = ()
    properties: tuple = tuple(sorted(binning_mod.PROPERTIES))
    # report
    format: str = "csv"  # csv | json (influence table)
    charts: bool = True
    # execution
    jobs: int = 1

    def savgol_params(self, sampling_rate_hz: float) -> SavGolParams:
        return SavGolParams(self.sg_window, self.sg_order, 1.0 / sampling_rate_hz)

    def detection_params(self) -> DetectionParams:
        return DetectionParams(
            fix_max_velocity=self.fix_max_velocity,
            fix_min_duration_ms=self.fix_min_duration_ms,
            fix_max_dispersion_deg=self.fix_max_dispersion_deg,
            sacc_lambda=self.sacc_lambda,
            sacc_min_duration_ms=self.sacc_min_duration_ms,
            sacc_max_duration_ms=self.sacc_max_duration_ms,
            sacc_min_peak_velocity=self.sacc_min_peak_velocity,
            sacc_max_peak_velocity=self.sacc_max_peak_velocity,
            eta_floor=self.eta_floor,
        )

    def validate(self):
        if self.norm_scope not in ("corpus", "recording", "none"):
            raise ConfigError(f"norm_scope must be corpus/recording/none, got {self.norm_scope!r}")
        if self.squash not in ("signed", "abs"):
            raise ConfigError(f"squash must be signed/abs, got {self.squash!r}")
        if self.aggregate not in ("pooled", "mean", "both"):
            raise ConfigError(f"aggregate must be pooled/mean/both, got {self.aggregate!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv/json, got {self.format!r}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        for prop in self.properties:
            if prop not in binning_mod.PROPERTIES:
                raise ConfigError(f"unknown property {prop!r}")
        self.detection_params().validate()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bin_edges"] = list(self.bin_edges)
        d["properties"] = list(self.properties)
        return d

    def analysis_dict(self) -> dict:
        """Parameter echo for the report: everything that shapes results
        (the execution-only jobs count is excluded so parallel runs stay
        byte-identical)."""
        d = self.as_dict()
        d.pop("jobs")
        return d


@contextmanager
def _stage(name: str):
    """Prefix errors with the pipeline stage that raised them."""
    try:
        yield
    except GazeError as e:
        raise type(e)(f"[stage {name}] {e}") from e
    except OSError as e:
        raise OSError(f"[stage {name}] {e}") from e


@dataclass
class PreprocessResult:
    windows: list  # evaluation windows, manifest order
    windows_by_id: dict
    summaries: dict  # recording_id -> WindowingSummary
    channel_stats: dict  # scope label -> ChannelStats


@dataclass
class WindowBundle:
    """Everything computed per window before corpus-level reduction."""

    window_id: str
    fixations: list
    saccades: list
    dissections: list
    topk: object
    window_results: dict  # concept -> InfluenceResult | None (absent concept)


@dataclass
class RunResult:
    config: RunConfig
    preprocess: PreprocessResult
    bundles: list
    corpus_results: dict  # concept -> (InfluenceResult | None, skipped count)
    binned: dict  # property -> list[BinnedInfluence]
    counts: dict
    report_doc: dict
    out_dir: Path | None = None
    written: list = field(default_factory=list)


def preprocess_manifest(manifest, cfg: RunConfig) -> PreprocessResult:
    """Load manifest recordings, differentiate, clamp, and window them."""
    recordings = {}
    for entry in manifest.entries:
        if entry.recording not in recordings:
            recordings[entry.recording] = gio.load_gaze_csv(manifest.resolve(entry.recording))

    windows_by_id = {}
    summaries = {}
    per_recording_windows = {}
    for relpath, rec in recordings.items():
        mono = gio.select_eye(rec, cfg.eye if rec.eye == "binocular" else "mono")
        sg = cfg.savgol_params(mono.sampling_rate_hz)
        vx = clamp_velocities(savgol_derivative(mono.x_deg, sg), cfg.clamp)
        vy = clamp_velocities(savgol_derivative(mono.y_deg, sg), cfg.clamp)
        windows, summary = window_sequence(
            vx, vy, mono.x_deg, mono.y_deg, cfg.window_len,
            recording_id=mono.recording_id,
            sampling_rate_hz=mono.sampling_rate_hz,
            missing_max_frac=cfg.missing_max_frac,
        )
        summaries[mono.recording_id] = summary
        per_recording_windows[mono.recording_id] = windows
        for w in windows:
            if w.window_id in windows_by_id:
                raise DataError(f"window id {w.window_id!r} produced twice")
            windows_by_id[w.window_id] = w

    ordered = []
    for entry in manifest.entries:
        if entry.window_id not in windows_by_id:
            raise AlignmentError(
                f"window_id {entry.window_id!r} does not resolve to any window "
                f"produced from the manifest recordings"
            )
        ordered.append(windows_by_id[entry.window_id])

    channel_stats = {}
    if cfg.norm_scope == "corpus" and ordered:
        channel_stats["corpus"] = compute_channel_stats(ordered)
    elif cfg.norm_scope == "recording":
        for rec_id, windows in sorted(per_recording_windows.items()):
            if windows:
                channel_stats[rec_id] = compute_channel_stats(windows)
    return PreprocessResult(ordered, windows_by_id, summaries, channel_stats)


def normalized_windows(pre: PreprocessResult, cfg: RunConfig):
    """Z-scored copies of the evaluation windows (model-input parity)."""
    if cfg.norm_scope == "none":
        return list(pre.windows)
    out = []
    for w in pre.windows:
        stats = pre.channel_stats[
            "corpus" if cfg.norm_scope == "corpus" else w.recording_id
        ]
        out.append(zscore_normalize(w, stats))
    return out


def window_segmentations(window, fixations, saccades, dissections) -> dict:
    """Concept masks for one window from its retained events and phases."""
    segs = {
        FIXATION: concept_segmentation(
            retained(fixations), FIXATION, window.length, window.window_id
        ),
        SACCADE: concept_segmentation(
            retained(saccades), SACCADE, window.length, window.window_id
        ),
    }
    for phase in PHASES:
        subs = [s for d in dissections for s in d.sub_events if s.phase == phase]
        segs[f"saccade_{phase}"] = concept_segmentation(
            subs, f"saccade_{phase}", window.length, window.window_id
        )
    return segs


def process_window(window, attribution_path, cfg: RunConfig) -> WindowBundle:
    """Detect, dissect and score one window against its attribution map."""
    params = cfg.detection_params()
    fixations = detect_fixations_ivt(window, params)
    saccades = detect_saccades_ek(window, params)
    dissections = dissect_all(saccades, window, cfg.peak_ratio, cfg.flank_ratio)

    attr = gio.load_attribution(attribution_path, window_id=window.window_id)
    gio.validate_attribution(attr, window)
    squashed = squash_channels(attr, cfg.squash)
    topk = topk_segmentation(
        squashed, default_k(window.length, cfg.top_frac), window.window_id
    )

    window_results = {}
    for concept, seg in window_segmentations(window, fixations, saccades, dissections).items():
        window_results[concept] = concept_influence(seg, topk) if seg.size else None
    return WindowBundle(
        window_id=window.window_id,
        fixations=fixations,
        saccades=saccades,
        dissections=dissections,
        topk=topk,
        window_results=window_results,
    )


def _reduce_concepts(bundles) -> dict:
    out = {}
    for concept in ALL_CONCEPTS:
        per_window = [b.window_results[concept] for b in bundles]
        present = [r for r in per_window if r is not None]
        skipped = len(per_window) - len(present)
        out[concept] = (aggregate_influence(present) if present else None, skipped)
    return out


def _exclusion_counts(events) -> dict:
    counts = {"retained": 0, "excluded": {}}
    for e in events:
        if e.excluded:
            counts["excluded"][e.exclusion_reason] = (
                counts["excluded"].get(e.exclusion_reason, 0) + 1
            )
        else:
            counts["retained"] += 1
    counts["excluded"] = dict(sorted(counts["excluded"].items()))
    return counts


def _bin_all(bundles, cfg: RunConfig) -> dict:
    topk_by_window = {b.window_id: b.topk for b in bundles}
    events_by_kind = {
        FIXATION: [e for b in bundles for e in retained(b.fixations)],
        SACCADE: [e for b in bundles for e in retained(b.saccades)],
    }
    binned = {}
    for prop in cfg.properties:
        kind, attr = binning_mod.PROPERTIES[prop]
        events = [e for e in events_by_kind[kind] if math.isfinite(getattr(e, attr))]
        if not events:
            binned[prop] = []
            continue
        spec = binning_mod.BinSpec(
            property=prop, mode=cfg.bin_mode, n_bins=cfg.bins, edges=cfg.bin_edges
        )
        validity = VALIDITY_RANGES[prop](cfg) if cfg.bin_mode == "width" else None
        bins = binning_mod.bin_events(events, spec, validity_range=validity)
        binned[prop] = binning_mod.binned_influence(bins, spec, topk_by_window)
    return binned


def _counts(pre: PreprocessResult, bundles, cfg: RunConfig) -> dict:
    fixations = [e for b in bundles for e in b.fixations]
    saccades = [e for b in bundles for e in b.saccades]
    disregarded = sum(d.disregarded for b in bundles for d in b.dissections)
    saccade_samples = sum(
        e.n_samples for b in bundles for e in retained(b.saccades)
    )
    return {
        "windows": {
            "evaluated": len(pre.windows),
            "excluded_missing": sum(s.excluded for s in pre.summaries.values()),
            "tail_samples_discarded": sum(s.tail_samples for s in pre.summaries.values()),
        },
        "events": {
            FIXATION: _exclusion_counts(fixations),
            SACCADE: _exclusion_counts(saccades),
        },
        "dissection": {
            "saccades_dissected": sum(len(b.dissections) for b in bundles),
            "disregarded_samples": disregarded,
            "disregarded_fraction": (
                disregarded / saccade_samples if saccade_samples else 0.0
            ),
        },
        "channel_stats": {
            scope: {
                "mean_x": stats.mean_x,
                "std_x": stats.std_x,
                "mean_y": stats.mean_y,
                "std_y": stats.std_y,
                "n": stats.n,
            }
            for scope, stats in sorted(pre.channel_stats.items())
        },
    }


def run(manifest, cfg: RunConfig, out_dir) -> RunResult:
    """Execute the full pipeline for a manifest and write all artifacts."""
    cfg.validate()
    out_dir = Path(out_dir)

    with _stage("preprocess"):
        pre = preprocess_manifest(manifest, cfg)
        if not pre.windows:
            raise DataError("manifest yields no evaluation windows")

    with _stage("influence"):
        attr_paths = [manifest.resolve(e.attribution) for e in manifest.entries]
        for p in attr_paths:
            if not p.exists():
                raise OSError(f"attribution file not found: {p}")
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                bundles = list(
                    pool.map(
                        lambda pair: process_window(pair[0], pair[1], cfg),
                        zip(pre.windows, attr_paths),
                    )
                )
        else:
            bundles = [
                process_window(w, p, cfg) for w, p in zip(pre.windows, attr_paths)
            ]
        corpus_results = _reduce_concepts(bundles)

    with _stage("binning"):
        binned = _bin_all(bundles, cfg)

    with _stage("report"):
        counts = _counts(pre, bundles, cfg)
        report_doc = report_mod.summarize(
            cfg.analysis_dict(), counts, corpus_results, binned
        )

    result = RunResult(cfg, pre, bundles, corpus_results, binned, counts, report_doc)
    write_artifacts(result, out_dir)
    return result


def write_artifacts(result: RunResult, out_dir: Path):
    """Write every run artifact; on failure remove partial outputs and
    leave an INCOMPLETE marker naming the error."""
    out_dir = Path(out_dir)
    cfg = result.config
    written = []
    try:
        with _stage("report"):
            out_dir.mkdir(parents=True, exist_ok=True)
            events = [e for b in result.bundles for e in b.fixations + b.saccades]
            path = out_dir / "events.csv"
            gio.write_events(events, path)
            written.append(path)

            subs = [s for b in result.bundles for d in b.dissections for s in d.sub_events]
            path = out_dir / "subevents.csv"
            gio.write_subevents(subs, path)
            written.append(path)

            influence_rows = []
            for b in result.bundles:
                influence_rows.extend(
                    r for r in b.window_results.values() if r is not None
                )
            for concept in ALL_CONCEPTS:
                corpus, skipped = result.corpus_results[concept]
                if corpus is not None:
                    corpus.n_skipped = skipped
                    influence_rows.append(corpus)
            path = out_dir / f"influence.{cfg.format}"
            gio.write_report(influence_rows, path, cfg.format)
            written.append(path)

            path = out_dir / "binned.csv"
            binning_mod.write_binned(result.binned, path)
            written.append(path)

            path = out_dir / "report.json"
            report_mod.write_report_json(result.report_doc, path)
            written.append(path)

            if cfg.charts:
                charts_dir = out_dir / "charts"
                charts_dir.mkdir(exist_ok=True)
                value_attr = "c_mean" if cfg.aggregate == "mean" else "c"
                event_results = [
                    result.corpus_results[c][0]
                    for c in EVENT_CONCEPTS
                    if result.corpus_results[c][0] is not None
                ]
                if event_results:
                    path = charts_dir / "concepts.svg"
                    report_mod.render_bar_chart(event_results, path, value_attr)
                    written.append(path)
                phase_results = [
                    result.corpus_results[c][0]
                    for c in PHASE_CONCEPTS
                    if result.corpus_results[c][0] is not None
                ]
                if phase_results:
                    path = charts_dir / "phases.svg"
                    report_mod.render_bar_chart(
                        phase_results, path, value_attr, title="saccade phase influence"
                    )
                    written.append(path)
                for prop, rows in sorted(result.binned.items()):
                    if any(b.label == "bin" and b.influence is not None for b in rows):
                        path = charts_dir / f"by_{prop}.svg"
                        report_mod.render_line_chart(rows, path, value_attr)
                        written.append(path)

            run_log = {
                "parameters": cfg.as_dict(),
                "counts": result.counts,
                "outputs": [str(p.relative_to(out_dir)) for p in written],
            }
            path = out_dir / "run_log.json"
            path.write_text(json.dumps(run_log, indent=2, default=float) + "\n", encoding="utf-8")
            written.append(path)
    except BaseException as e:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        try:
            (out_dir / "INCOMPLETE").write_text(f"{e}\n", encoding="utf-8")
        except OSError:
            pass
        raise
    result.out_dir = out_dir
    result.written = written
