import math

import numpy as np
import pytest

from gazeconcepts.preprocess import (
    SavGolParams,
    VelocityWindow,
    clamp_velocities,
    savgol_derivative,
    window_sequence,
)


def build_window(vx, vy=None, px=None, py=None, window_id="w0000", valid=None,
                 sampling_rate_hz=1000.0):
    """VelocityWindow straight from arrays (bypasses the SG chain)."""
    vx = np.asarray(vx, dtype=float)
    vy = np.zeros_like(vx) if vy is None else np.asarray(vy, dtype=float)
    px = np.zeros_like(vx) if px is None else np.asarray(px, dtype=float)
    py = np.zeros_like(vx) if py is None else np.asarray(py, dtype=float)
    if valid is None:
        valid = np.isfinite(vx) & np.isfinite(vy)
    return VelocityWindow(
        window_id=window_id,
        recording_id="rec",
        start_index=0,
        vx=vx,
        vy=vy,
        px=px,
        py=py,
        valid_mask=np.asarray(valid, dtype=bool),
        sampling_rate_hz=sampling_rate_hz,
    )


def pipeline_windows(rec, window_len=1000, clamp=1000.0, sg=None):
    """The production preprocess chain for a monocular recording."""
    sg = sg or SavGolParams(dt_s=1.0 / rec.sampling_rate_hz)
    vx = clamp_velocities(savgol_derivative(rec.x_deg, sg), clamp)
    vy = clamp_velocities(savgol_derivative(rec.y_deg, sg), clamp)
    windows, summary = window_sequence(
        vx, vy, rec.x_deg, rec.y_deg, window_len,
        recording_id=rec.recording_id, sampling_rate_hz=rec.sampling_rate_hz,
    )
    return windows, summary


def raised_cosine_speeds(n, peak):
    """Speed samples of the generator's saccade profile."""
    return peak * np.sin(np.pi * np.arange(n) / n)


def match_events(truth, detected, tol=2):
    """Count ground-truth events recovered within +/- tol samples."""
    pool = [e for e in detected if not e.excluded]
    used = set()
    matched = 0
    for g in truth:
        for j, e in enumerate(pool):
            if j in used:
                continue
            if abs(e.onset - g.onset) <= tol and abs(e.offset - g.offset) <= tol:
                used.add(j)
                matched += 1
                break
    return matched


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def assert_close(a, b, rtol=1e-9, atol=0.0):
    assert math.isclose(a, b, rel_tol=rtol, abs_tol=atol), f"{a} != {b}"
