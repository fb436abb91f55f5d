"""Subcommand front-end: synth, preprocess, detect, dissect, influence,
bin, report, and run.

Precedence for every parameter is CLI flag over config file over
built-in default. The config file is INI-style; keys may live in any
section and must name RunConfig fields (e.g. sg_window, sacc_lambda).
Exit codes: 0 success, 1 usage/configuration, 2 data, 3 I/O.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import binning as binning_mod
from . import io as gio
from . import report as report_mod
from .detect import FIXATION, SACCADE, detect_fixations_ivt, detect_saccades_ek, retained
from .dissect import dissect_all
from .errors import ConfigError, DataError, GazeError
from .influence import (
    aggregate_influence,
    concept_influence,
    concept_segmentation,
    default_k,
    squash_channels,
    topk_segmentation,
)
from .pipeline import (
    ALL_CONCEPTS,
    EVENT_CONCEPTS,
    PHASE_CONCEPTS,
    VALIDITY_RANGES,
    RunConfig,
    normalized_windows,
    preprocess_manifest,
    run,
    window_segmentations,
)
from .synth import ATTRIBUTION_MODES, CorpusSpec, write_demo_corpus

ENV_OUT = "GAZECONCEPTS_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _field_defaults():
    return {f.name: getattr(RunConfig(), f.name) for f in fields(RunConfig)}


def _coerce(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [tok.strip() for tok in raw.split(",") if tok.strip()]
            if name == "bin_edges":
                return tuple(float(t) for t in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r}") from None


def _load_ini(path) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise OSError(f"config file not found: {path}")
    flat = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            flat[key] = value
    return flat


def resolve_config(args, extra_config: str | None = None) -> RunConfig:
    """defaults < config file < CLI flags."""
    defaults = _field_defaults()
    values = dict(defaults)
    config_path = getattr(args, "config", None) or extra_config
    if config_path:
        for key, raw in _load_ini(config_path).items():
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, defaults[key])
    for name in defaults:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = tuple(flag) if isinstance(defaults[name], tuple) else flag
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _add_analysis_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("preprocess")
    g.add_argument("--sg-window", dest="sg_window", type=int)
    g.add_argument("--sg-order", dest="sg_order", type=int)
    g.add_argument("--clamp", dest="clamp", type=float)
    g.add_argument("--window-len", dest="window_len", type=int)
    g.add_argument("--missing-max-frac", dest="missing_max_frac", type=float)
    g.add_argument("--norm-scope", dest="norm_scope", choices=["corpus", "recording", "none"])
    g.add_argument("--eye", dest="eye", choices=["left", "right"])
    g = p.add_argument_group("detect")
    g.add_argument("--fix-max-velocity", dest="fix_max_velocity", type=float)
    g.add_argument("--fix-min-duration-ms", dest="fix_min_duration_ms", type=float)
    g.add_argument("--fix-max-dispersion-deg", dest="fix_max_dispersion_deg", type=float)
    g.add_argument("--sacc-lambda", dest="sacc_lambda", type=float)
    g.add_argument("--sacc-min-duration-ms", dest="sacc_min_duration_ms", type=float)
    g.add_argument("--sacc-max-duration-ms", dest="sacc_max_duration_ms", type=float)
    g.add_argument("--sacc-min-peak-velocity", dest="sacc_min_peak_velocity", type=float)
    g.add_argument("--sacc-max-peak-velocity", dest="sacc_max_peak_velocity", type=float)
    g.add_argument("--eta-floor", dest="eta_floor", type=float)
    g = p.add_argument_group("dissect")
    g.add_argument("--peak-ratio", dest="peak_ratio", type=float)
    g.add_argument("--flank-ratio", dest="flank_ratio", type=float)
    g = p.add_argument_group("influence")
    g.add_argument("--top-frac", dest="top_frac", type=float)
    g.add_argument("--squash", dest="squash", choices=["signed", "abs"])
    g.add_argument("--aggregate", dest="aggregate", choices=["pooled", "mean", "both"])
    g = p.add_argument_group("binning")
    g.add_argument("--bins", dest="bins", type=int)
    g.add_argument("--bin-mode", dest="bin_mode", choices=["width", "quantile", "explicit"])
    g.add_argument(
        "--bin-edges", dest="bin_edges",
        type=lambda s: [float(t) for t in s.split(",") if t.strip()],
    )
    g.add_argument(
        "--property", dest="properties", action="append",
        choices=sorted(binning_mod.PROPERTIES),
    )
    g = p.add_argument_group("report")
    g.add_argument("--format", dest="format", choices=["csv", "json"])
    g.add_argument("--charts", dest="charts", action=argparse.BooleanOptionalAction)


def _out_dir(args, manifest=None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    if manifest is not None and manifest.output_dir:
        return manifest.resolve(manifest.output_dir)
    return Path("out")


def cmd_synth(args) -> int:
    spec = CorpusSpec(
        seed=args.seed,
        n_recordings=args.recordings,
        duration_s=args.duration_s,
        window_len=args.window_len if args.window_len else 1000,
        noise_velocity_sigma_dps=args.noise_vel_sigma,
        attribution_mode=args.attr_mode,
        saccade_ms=tuple(args.saccade_ms),
        peak_velocity_dps=tuple(args.peak_dps),
        fixation_ms=tuple(args.fixation_ms),
    )
    out = _out_dir(args)
    manifest_path = write_demo_corpus(out, spec)
    print(f"wrote corpus with manifest {manifest_path}")
    return 0


def cmd_run(args) -> int:
    manifest = gio.load_manifest(args.manifest)
    cfg = resolve_config(args, extra_config=manifest.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    out = _out_dir(args, manifest)
    result = run(manifest, cfg, out)
    n_events = sum(len(b.fixations) + len(b.saccades) for b in result.bundles)
    print(
        f"run complete: {len(result.bundles)} windows, {n_events} events, "
        f"artifacts in {out}"
    )
    return 0


def cmd_preprocess(args) -> int:
    manifest = gio.load_manifest(args.manifest)
    cfg = resolve_config(args, extra_config=manifest.config)
    out = _out_dir(args, manifest)
    out.mkdir(parents=True, exist_ok=True)
    pre = preprocess_manifest(manifest, cfg)
    gio.write_windows(pre.windows, out / "windows.csv")
    if cfg.norm_scope != "none":
        gio.write_windows(normalized_windows(pre, cfg), out / "windows_normalized.csv")
    stats = {
        "summaries": {
            rec: {
                "window_len": s.window_len,
                "retained": s.retained,
                "excluded": s.excluded,
                "tail_samples": s.tail_samples,
                "excluded_window_ids": s.excluded_window_ids,
            }
            for rec, s in sorted(pre.summaries.items())
        },
        "channel_stats": {
            scope: {"mean_x": st.mean_x, "std_x": st.std_x,
                    "mean_y": st.mean_y, "std_y": st.std_y, "n": st.n}
            for scope, st in sorted(pre.channel_stats.items())
        },
    }
    (out / "preprocess_stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    print(f"wrote {len(pre.windows)} windows to {out / 'windows.csv'}")
    return 0


def _read_stage_windows(args, out: Path):
    path = Path(args.windows) if getattr(args, "windows", None) else out / "windows.csv"
    return gio.read_windows(path)


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args)
    events = []
    for w in _read_stage_windows(args, out):
        params = cfg.detection_params()
        events.extend(detect_fixations_ivt(w, params))
        events.extend(detect_saccades_ek(w, params))
    gio.write_events(events, out / "events.csv")
    kept = len(retained(events))
    print(f"wrote {len(events)} events ({kept} retained) to {out / 'events.csv'}")
    return 0


def cmd_dissect(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args)
    windows = {w.window_id: w for w in _read_stage_windows(args, out)}
    events = gio.read_events(out / "events.csv")
    subs = []
    disregarded = 0
    n_saccades = 0
    for e in retained(events):
        if e.kind != SACCADE:
            continue
        if e.window_id not in windows:
            raise DataError(f"event {e.event_id} references unknown window {e.window_id}")
        d = dissect_all([e], windows[e.window_id], cfg.peak_ratio, cfg.flank_ratio)[0]
        subs.extend(d.sub_events)
        disregarded += d.disregarded
        n_saccades += 1
    gio.write_subevents(subs, out / "subevents.csv")
    sacc_samples = sum(
        e.n_samples for e in retained(events) if e.kind == SACCADE
    )
    stats = {
        "saccades_dissected": n_saccades,
        "disregarded_samples": disregarded,
        "disregarded_fraction": disregarded / sacc_samples if sacc_samples else 0.0,
    }
    (out / "dissect_stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    print(f"wrote {len(subs)} sub-events to {out / 'subevents.csv'}")
    return 0


def _topk_for_manifest(manifest, windows_by_id, cfg):
    topk = {}
    for entry in manifest.entries:
        attr = gio.load_attribution(manifest.resolve(entry.attribution), entry.window_id)
        window = windows_by_id.get(entry.window_id)
        if window is None:
            raise DataError(f"manifest window {entry.window_id!r} not in windows file")
        gio.validate_attribution(attr, window)
        squashed = squash_channels(attr, cfg.squash)
        topk[entry.window_id] = topk_segmentation(
            squashed, default_k(window.length, cfg.top_frac), entry.window_id
        )
    return topk


def _stage_segmentations(manifest, windows_by_id, events, subs):
    """Per-window concept masks rebuilt from staged artifacts."""
    events_by_window = {}
    for e in retained(events):
        events_by_window.setdefault(e.window_id, {}).setdefault(e.kind, []).append(e)
    subs_by_window = {}
    for s in subs:
        wid = s.parent_event_id.rsplit(":", 1)[0]
        subs_by_window.setdefault(wid, {}).setdefault(s.phase, []).append(s)

    segs = {}
    for entry in manifest.entries:
        wid = entry.window_id
        length = windows_by_id[wid].length
        ev = events_by_window.get(wid, {})
        sv = subs_by_window.get(wid, {})
        per_concept = {}
        for kind in (FIXATION, SACCADE):
            per_concept[kind] = concept_segmentation(ev.get(kind, []), kind, length, wid)
        for phase in ("pre", "rise", "peak", "fall", "post"):
            label = f"saccade_{phase}"
            per_concept[label] = concept_segmentation(sv.get(phase, []), label, length, wid)
        segs[wid] = per_concept
    return segs


def cmd_influence(args) -> int:
    manifest = gio.load_manifest(args.manifest)
    cfg = resolve_config(args, extra_config=manifest.config)
    out = _out_dir(args, manifest)
    windows_by_id = {w.window_id: w for w in _read_stage_windows(args, out)}
    events = gio.read_events(out / "events.csv")
    subs = gio.read_subevents(out / "subevents.csv")
    topk = _topk_for_manifest(manifest, windows_by_id, cfg)
    segs = _stage_segmentations(manifest, windows_by_id, events, subs)

    rows = []
    per_concept = {c: [] for c in ALL_CONCEPTS}
    skipped = {c: 0 for c in ALL_CONCEPTS}
    for entry in manifest.entries:
        for concept in ALL_CONCEPTS:
            seg = segs[entry.window_id][concept]
            if seg.size == 0:
                skipped[concept] += 1
                continue
            r = concept_influence(seg, topk[entry.window_id])
            per_concept[concept].append(r)
            rows.append(r)
    for concept in ALL_CONCEPTS:
        if per_concept[concept]:
            corpus = aggregate_influence(per_concept[concept])
            corpus.n_skipped = skipped[concept]
            rows.append(corpus)
    path = out / f"influence.{cfg.format}"
    gio.write_report(rows, path, cfg.format)
    print(f"wrote influence table to {path}")
    return 0


def cmd_bin(args) -> int:
    manifest = gio.load_manifest(args.manifest)
    cfg = resolve_config(args, extra_config=manifest.config)
    out = _out_dir(args, manifest)
    windows_by_id = {w.window_id: w for w in _read_stage_windows(args, out)}
    events = gio.read_events(out / "events.csv")
    topk = _topk_for_manifest(manifest, windows_by_id, cfg)
    binned = {}
    for prop in cfg.properties:
        kind, attr_name = binning_mod.PROPERTIES[prop]
        pool = [
            e for e in retained(events)
            if e.kind == kind and math.isfinite(getattr(e, attr_name))
        ]
        if not pool:
            binned[prop] = []
            continue
        spec = binning_mod.BinSpec(prop, cfg.bin_mode, cfg.bins, cfg.bin_edges)
        validity = VALIDITY_RANGES[prop](cfg) if cfg.bin_mode == "width" else None
        bins = binning_mod.bin_events(pool, spec, validity_range=validity)
        binned[prop] = binning_mod.binned_influence(bins, spec, topk)
    binning_mod.write_binned(binned, out / "binned.csv")
    print(f"wrote binned influence to {out / 'binned.csv'}")
    return 0


def cmd_report(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args)
    influence_path = out / f"influence.{cfg.format}"
    results = gio.read_report(influence_path, cfg.format)
    corpus = {}
    for r in results:
        if r.scope == "corpus":
            corpus[r.concept] = (r, r.n_skipped)
    for concept in ALL_CONCEPTS:
        corpus.setdefault(concept, (None, 0))
    binned_path = out / "binned.csv"
    binned = binning_mod.read_binned(binned_path) if binned_path.exists() else {}

    counts = {}
    pre_stats = out / "preprocess_stats.json"
    if pre_stats.exists():
        counts["preprocess"] = json.loads(pre_stats.read_text())
    events_path = out / "events.csv"
    if events_path.exists():
        events = gio.read_events(events_path)
        counts["events"] = {}
        for kind in (FIXATION, SACCADE):
            pool = [e for e in events if e.kind == kind]
            excl = {}
            for e in pool:
                if e.excluded:
                    excl[e.exclusion_reason] = excl.get(e.exclusion_reason, 0) + 1
            counts["events"][kind] = {
                "retained": len([e for e in pool if not e.excluded]),
                "excluded": dict(sorted(excl.items())),
            }
    dis_stats = out / "dissect_stats.json"
    if dis_stats.exists():
        counts["dissection"] = json.loads(dis_stats.read_text())

    doc = report_mod.summarize(cfg.analysis_dict(), counts, corpus, binned)
    report_mod.write_report_json(doc, out / "report.json")
    written = [out / "report.json"]
    if cfg.charts:
        charts = out / "charts"
        charts.mkdir(exist_ok=True)
        value_attr = "c_mean" if cfg.aggregate == "mean" else "c"
        event_results = [corpus[c][0] for c in EVENT_CONCEPTS if corpus[c][0]]
        if event_results:
            report_mod.render_bar_chart(event_results, charts / "concepts.svg", value_attr)
            written.append(charts / "concepts.svg")
        phase_results = [corpus[c][0] for c in PHASE_CONCEPTS if corpus[c][0]]
        if phase_results:
            report_mod.render_bar_chart(
                phase_results, charts / "phases.svg", value_attr,
                title="saccade phase influence",
            )
            written.append(charts / "phases.svg")
        for prop, rows in sorted(binned.items()):
            if any(b.label == "bin" and b.influence is not None for b in rows):
                report_mod.render_line_chart(rows, charts / f"by_{prop}.svg", value_attr)
                written.append(charts / f"by_{prop}.svg")
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gazeconcepts", description=__doc__)
    sub = parser.add_subparsers(dest="cmd")

    p = sub.add_parser("synth", help="generate the synthetic demo corpus")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./out)")
    p.add_argument("--seed", type=int, default=20230403)
    p.add_argument("--recordings", type=int, default=4)
    p.add_argument("--duration-s", type=float, default=130.0)
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--noise-vel-sigma", type=float, default=0.5,
                   help="velocity noise sigma in deg/s")
    p.add_argument("--attr-mode", choices=ATTRIBUTION_MODES, default="speed")
    p.add_argument("--saccade-ms", nargs=2, type=float, default=[20.0, 60.0])
    p.add_argument("--peak-dps", nargs=2, type=float, default=[100.0, 400.0])
    p.add_argument("--fixation-ms", nargs=2, type=float, default=[80.0, 250.0])
    p.set_defaults(func=cmd_synth)

    def stage(name, help_, needs_manifest):
        sp = sub.add_parser(name, help=help_)
        if needs_manifest:
            sp.add_argument("--manifest", required=True)
        sp.add_argument("--out")
        sp.add_argument("--config")
        sp.add_argument("--windows", help="windows.csv path (default <out>/windows.csv)")
        _add_analysis_flags(sp)
        return sp

    stage("preprocess", "recordings to velocity windows", True).set_defaults(
        func=cmd_preprocess
    )
    stage("detect", "windows to fixation/saccade events", False).set_defaults(
        func=cmd_detect
    )
    stage("dissect", "saccades to phase sub-events", False).set_defaults(
        func=cmd_dissect
    )
    stage("influence", "concept influence per window and corpus", True).set_defaults(
        func=cmd_influence
    )
    stage("bin", "per-property binned influence", True).set_defaults(func=cmd_bin)
    stage("report", "summary document and charts", False).set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=None)
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            parser.print_help()
            return 1
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except GazeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
