import numpy as np
import pytest

import hapstep as hs
from hapstep.synthetic import synthetic_walk

KNOT_SPEEDS = (1.0, 2.5, 4.0)

PROFILE_FS = 1000.0


def random_profile(rng, fs=PROFILE_FS):
    """Random valid brake-then-drive profile with matching phase timings."""
    b_dur = rng.uniform(0.15, 0.45)
    d_dur = rng.uniform(0.20, 0.50)
    gap = rng.uniform(0.0, 0.05)
    b_apex = b_dur * rng.uniform(0.25, 0.75)
    d_apex = d_dur * rng.uniform(0.25, 0.75)
    b_peak = rng.uniform(0.4, 3.0)
    d_peak = rng.uniform(0.4, 3.0)
    end = b_dur + gap + d_dur
    t = np.arange(int(round(end * fs))) / fs
    v = np.interp(t, [0.0, b_apex, b_dur], [0.0, -b_peak, 0.0],
                  left=0.0, right=0.0) \
        + np.interp(t, [b_dur + gap, b_dur + gap + d_apex, end],
                    [0.0, d_peak, 0.0], left=0.0, right=0.0)
    phases = hs.PhaseTimings(0.0, b_apex, False,
                             b_dur + gap + d_apex, end, end)
    return hs.FrictionProfile(sample_rate_hz=fs, values=v, phases=phases)


def make_curve(direction, slope=3.0, intercept=0.0, min_duty=0.0, r_squared=1.0):
    return hs.CalibrationCurve(direction=direction, slope=slope,
                               intercept=intercept, r_squared=r_squared,
                               min_duty=min_duty)


def clamp_free_curves():
    """intercept 0, min_duty 0: force -> duty -> force is the identity."""
    return make_curve("forward"), make_curve("backward")


def walk_to_profile(speed, seed=0, jitter=0.05):
    """Full segmentation pipeline on one synthetic walk."""
    trace, _ = synthetic_walk(n_steps=30, speed_kmh=speed, jitter=jitter,
                              rng=np.random.default_rng(seed))
    segs = hs.select_middle(hs.segment_steps(trace))
    profs = [hs.combine_channels(s, hs.detect_phases(s)) for s in segs]
    return hs.average_profiles(hs.align_durations(profs))


def build_knot_table(device_max_force=3.0, seed=0):
    raw = {}
    for speed in KNOT_SPEEDS:
        averaged = walk_to_profile(speed, seed=seed)
        corrected, balanced = hs.treadmill_correct(averaged)
        raw[speed] = hs.compile_triangular(corrected, balanced, speed_kmh=speed)
    return hs.fit_device_scale(raw, device_max_force)


@pytest.fixture(scope="session")
def knot_table():
    return build_knot_table()
