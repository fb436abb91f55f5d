import math

import numpy as np
import pytest

from gazeconcepts.detect import GazeEvent
from gazeconcepts.errors import (
    AlignmentError,
    ConfigError,
    DataError,
    FormatError,
)
from gazeconcepts.influence import InfluenceResult
from gazeconcepts.io import (
    AttributionMap,
    load_attribution,
    load_attributions,
    load_gaze_csv,
    load_manifest,
    read_events,
    read_report,
    read_subevents,
    read_windows,
    select_eye,
    validate_attribution,
    write_attribution,
    write_events,
    write_gaze_csv,
    write_report,
    write_subevents,
    write_windows,
)
from gazeconcepts.dissect import SubEvent
from gazeconcepts.synth import random_plan, gen_scanpath

from conftest import build_window


def test_trivial_three_rows(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0,0\n1,0,0\n2,0,0\n")
    rec = load_gaze_csv(p)
    assert rec.n_samples == 3
    assert rec.eye == "mono"
    assert not np.isnan(rec.x_deg).any()
    np.testing.assert_array_equal(rec.t_ms, [0, 1, 2])


@pytest.mark.parametrize("token", ["NaN", "nan", ".", ""])
def test_missing_tokens_normalized(tmp_path, token):
    p = tmp_path / "g.csv"
    p.write_text(f"t_ms,x_deg,y_deg\n0,{token},1.0\n1,2.0,3.0\n")
    rec = load_gaze_csv(p)
    assert math.isnan(rec.x_deg[0]) and math.isnan(rec.y_deg[0])  # coupled
    assert rec.x_deg[1] == 2.0


def test_unparseable_coordinate_becomes_missing(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,abc,1.0\n1,2.0,3.0\n")
    rec = load_gaze_csv(p)
    assert math.isnan(rec.x_deg[0]) and math.isnan(rec.y_deg[0])


def test_synth_roundtrip_bit_identical(tmp_path):
    plan = random_plan(7, 10.0, noise_sigma_deg=0.003)
    rec, _ = gen_scanpath(plan, seed=7, recording_id="r")
    assert rec.n_samples >= 10_000
    p = tmp_path / "r.csv"
    write_gaze_csv(rec, p)
    back = load_gaze_csv(p)
    np.testing.assert_array_equal(back.t_ms, rec.t_ms)
    np.testing.assert_array_equal(back.x_deg, rec.x_deg)
    np.testing.assert_array_equal(back.y_deg, rec.y_deg)
    p2 = tmp_path / "r2.csv"
    write_gaze_csv(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_non_monotone_timestamps_error(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0,0\n2,0,0\n1,0,0\n4,0,0\n")
    with pytest.raises(DataError, match="line 4"):
        load_gaze_csv(p)


def test_unparseable_timestamp_error(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0,0\nxx,0,0\n")
    with pytest.raises(DataError, match="line 3"):
        load_gaze_csv(p)


def test_empty_file_and_bad_header(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(DataError):
        load_gaze_csv(p)
    p2 = tmp_path / "bad.csv"
    p2.write_text("time,x,y\n0,0,0\n")
    with pytest.raises(FormatError):
        load_gaze_csv(p2)
    # but a schema mapping makes it loadable
    rec = load_gaze_csv(p2, schema={"t_ms": "time", "x_deg": "x", "y_deg": "y"})
    assert rec.n_samples == 1


def test_row_conservation_with_blank_lines(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0,0\n\n1,0,0\n\n\n2,0,0\n")
    rec = load_gaze_csv(p)
    body_lines = 6
    assert rec.n_samples + int(rec.source_meta["skipped_rows"]) == body_lines


def test_short_row_is_format_error(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0\n")
    with pytest.raises(FormatError, match="line 2"):
        load_gaze_csv(p)


def _binocular_file(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text(
        "t_ms,x_left_deg,y_left_deg,x_right_deg,y_right_deg\n"
        "0,1.0,2.0,3.0,4.0\n1,1.1,2.1,3.1,4.1\n"
    )
    return p


def test_select_eye_right_default(tmp_path):
    rec = load_gaze_csv(_binocular_file(tmp_path))
    assert rec.eye == "binocular"
    right = select_eye(rec)
    assert right.eye == "right"
    np.testing.assert_array_equal(right.x_deg, [3.0, 3.1])
    left = select_eye(rec, "left")
    np.testing.assert_array_equal(left.x_deg, [1.0, 1.1])


def test_select_eye_mono_identity_and_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("t_ms,x_deg,y_deg\n0,0,0\n")
    rec = load_gaze_csv(p)
    assert select_eye(rec, "mono") is rec
    with pytest.raises(ConfigError):
        select_eye(rec, "left")
    bino = load_gaze_csv(_binocular_file(tmp_path))
    with pytest.raises(ConfigError):
        select_eye(bino, "mono")


def test_attribution_dense_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(8)
    attr = AttributionMap("w0", rng.normal(0, 1, (2, 500)), target_label="s01")
    p = tmp_path / "a.csv"
    write_attribution(attr, p)
    back = load_attribution(p, window_id="w0")
    np.testing.assert_array_equal(back.values, attr.values)
    assert back.target_label == "s01"
    assert back.channels == 2 and back.length == 500


def test_attribution_sparse_form(tmp_path):
    p = tmp_path / "a.csv"
    rows = ["channel,index,value"]
    for ch in range(2):
        for i in range(3):
            rows.append(f"{ch},{i},{ch * 10 + i}")
    p.write_text("\n".join(rows) + "\n")
    attr = load_attribution(p)
    np.testing.assert_array_equal(attr.values, [[0, 1, 2], [10, 11, 12]])


def test_attribution_shape_declaration_mismatch(tmp_path):
    p = tmp_path / "a.csv"
    values = ",".join(["0.5"] * 999)
    p.write_text(f"D=2\nL=1000\n{values}\n{values}\n")
    with pytest.raises(FormatError, match="declared L=1000"):
        load_attribution(p)
    p.write_text("D=2\nL=3\n1,2,3\n")
    with pytest.raises(FormatError, match="channel rows"):
        load_attribution(p)


def test_attribution_non_finite_named(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("D=2\nL=3\n1,2,3\n4,nan,6\n")
    with pytest.raises(DataError, match="channel 1, index 1"):
        load_attribution(p)


def test_attribution_window_alignment():
    w = build_window(np.zeros(100), np.zeros(100))
    good = AttributionMap("w0000", np.zeros((2, 100)))
    validate_attribution(good, w)
    bad = AttributionMap("w0000", np.zeros((2, 99)))
    with pytest.raises(AlignmentError, match="w0000"):
        validate_attribution(bad, w)


def test_manifest_load_and_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(
        '{"output_dir": "out", "entries": ['
        '{"recording": "r.csv", "attribution": "a.csv", "window_id": "w0"}]}'
    )
    m = load_manifest(p)
    assert m.entries[0].window_id == "w0"
    assert m.resolve("r.csv") == tmp_path / "r.csv"
    entries = (
        '{"recording": "r.csv", "attribution": "a.csv", "window_id": "w0"},'
        '{"recording": "r.csv", "attribution": "b.csv", "window_id": "w0"}'
    )
    p.write_text(f'{{"entries": [{entries}]}}')
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(p)
    p.write_text("not json")
    with pytest.raises(FormatError):
        load_manifest(p)
    p.write_text('{"no_entries": 1}')
    with pytest.raises(FormatError):
        load_manifest(p)


def test_load_attributions_manifest_order(tmp_path):
    for i in range(3):
        write_attribution(
            AttributionMap(f"w{i}", np.full((2, 4), float(i))), tmp_path / f"a{i}.csv"
        )
    p = tmp_path / "m.json"
    entries = ",".join(
        f'{{"recording": "r.csv", "attribution": "a{i}.csv", "window_id": "w{i}"}}'
        for i in (2, 0, 1)
    )
    p.write_text(f'{{"entries": [{entries}]}}')
    maps = load_attributions(load_manifest(p))
    assert [a.window_id for a in maps] == ["w2", "w0", "w1"]
    assert maps[0].values[0, 0] == 2.0


def _events(n=100):
    rng = np.random.default_rng(3)
    out = []
    for i in range(n):
        onset = int(rng.integers(0, 900))
        kind = "saccade" if i % 2 else "fixation"
        out.append(
            GazeEvent(
                event_id=f"w{i % 7:04d}:{kind[:3]}{i:03d}",
                kind=kind,
                window_id=f"w{i % 7:04d}",
                onset=onset,
                offset=onset + int(rng.integers(1, 80)),
                duration_ms=float(rng.uniform(1, 100)),
                peak_velocity=float(rng.uniform(10, 900)),
                amplitude_deg=float(rng.uniform(0, 20)) if kind == "saccade" else math.nan,
                dispersion_deg=float(rng.uniform(0, 3)) if kind == "fixation" else math.nan,
                velocity_std=float(rng.uniform(0, 10)) if kind == "fixation" else math.nan,
                excluded=bool(i % 5 == 0),
                exclusion_reason="min duration" if i % 5 == 0 else "",
            )
        )
    return out


def test_events_empty_header_only(tmp_path):
    p = tmp_path / "e.csv"
    write_events([], p)
    text = p.read_text()
    assert text.count("\n") == 1
    assert read_events(p) == []


def test_events_write_deterministic(tmp_path):
    events = _events(40)
    p1, p2 = tmp_path / "e1.csv", tmp_path / "e2.csv"
    write_events(events, p1)
    write_events(list(reversed(events)), p2)  # order-insensitive
    assert p1.read_bytes() == p2.read_bytes()


def test_events_roundtrip_100(tmp_path):
    events = _events(100)
    p = tmp_path / "e.csv"
    write_events(events, p)
    back = read_events(p)
    assert len(back) == 100
    key = lambda e: e.event_id
    for a, b in zip(sorted(events, key=key), sorted(back, key=key)):
        assert (a.onset, a.offset, a.kind, a.window_id) == (b.onset, b.offset, b.kind, b.window_id)
        assert a.excluded == b.excluded and a.exclusion_reason == b.exclusion_reason
        for attr in ("duration_ms", "peak_velocity", "amplitude_deg", "dispersion_deg", "velocity_std"):
            va, vb = getattr(a, attr), getattr(b, attr)
            assert (math.isnan(va) and math.isnan(vb)) or vb == pytest.approx(va, rel=1e-8)


def test_events_sorted_by_window_then_onset(tmp_path):
    p = tmp_path / "e.csv"
    write_events(_events(50), p)
    back = read_events(p)
    keys = [(e.window_id, e.onset) for e in back]
    assert keys == sorted(keys)


def test_subevents_roundtrip(tmp_path):
    subs = [
        SubEvent("w0001:sac000", "peak", 410, 420),
        SubEvent("w0001:sac000", "rise", 400, 409),
        SubEvent("w0000:sac001", "pre", 90, 99),
    ]
    p = tmp_path / "s.csv"
    write_subevents(subs, p)
    back = read_subevents(p)
    assert len(back) == 3
    assert back[0].parent_event_id == "w0000:sac001"  # sorted by window
    assert {(s.phase, s.onset, s.offset) for s in back} == {
        ("peak", 410, 420), ("rise", 400, 409), ("pre", 90, 99)
    }


def _results():
    return [
        InfluenceResult("saccade", "window", 12, 3.2, 1000, 80, 20, window_id="w0"),
        InfluenceResult("saccade", "corpus", 24, 2.71828182845, 2000, 160, 40,
                        c_mean=2.5, n_windows=2, n_skipped=1),
        InfluenceResult("fixation", "window", 0, 0.0, 1000, 800, 20, window_id="w0"),
    ]


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_report_roundtrip(tmp_path, fmt):
    p = tmp_path / f"r.{fmt}"
    write_report(_results(), p, fmt)
    back = read_report(p, fmt)
    assert len(back) == 3
    by_key = {(r.concept, r.scope): r for r in back}
    corpus = by_key[("saccade", "corpus")]
    assert corpus.intersection == 24
    assert corpus.c == pytest.approx(2.71828182845, rel=1e-8)
    assert corpus.c_mean == pytest.approx(2.5)
    assert corpus.n_skipped == 1
    assert by_key[("fixation", "window")].c == 0.0


def test_report_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_report(_results(), p1)
    write_report(list(reversed(_results())), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_windows_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(4)
    w1 = build_window(rng.normal(0, 5, 50), rng.normal(0, 5, 50),
                      px=rng.normal(0, 1, 50), py=rng.normal(0, 1, 50),
                      window_id="r-w0000")
    w1.vx[7] = np.nan
    w1.valid_mask[7] = False
    w2 = build_window(rng.normal(0, 5, 50), rng.normal(0, 5, 50), window_id="r-w0001")
    p = tmp_path / "w.csv"
    write_windows([w1, w2], p)
    back = read_windows(p)
    assert [w.window_id for w in back] == ["r-w0000", "r-w0001"]
    np.testing.assert_array_equal(back[0].vx, w1.vx)
    np.testing.assert_array_equal(back[0].valid_mask, w1.valid_mask)
    np.testing.assert_array_equal(back[1].py, w2.py)
    assert back[0].sampling_rate_hz == 1000.0
