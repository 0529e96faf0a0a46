import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avaba.data import FIELDS, Label, join_laser_log, load_frames, load_laser_log, write_frames, write_laser_log
from avaba.dynamics import QCAR_PUBLISHED, VehicleParams
from avaba.simulate import (
    AttackScript,
    Obstacle,
    Scenario,
    SteeringSegment,
    inject_attack,
    load_scenario,
    run_scenario,
    simulate_attack,
    synthetic_benchmark,
)

from conftest import make_frames

QCAR = VehicleParams()
QUIET = {}


def cols(frames, name):
    return np.array([getattr(f, name) for f in frames])


# ---------------------------------------------------------------- run_scenario


def test_straight_line_equilibrium():
    frames = run_scenario(QCAR, Scenario(duration=5.0, noise=QUIET))
    assert len(frames) == 500
    assert np.all(cols(frames, "lateral_speed") == 0)
    assert np.all(cols(frames, "yaw_rate") == 0)
    assert np.all(cols(frames, "yaw_angle") == 0)
    assert all(f.label == Label.NORMAL for f in frames)


def test_constant_steering_hand_recursion():
    sc = Scenario(duration=1.0, noise=QUIET, steering=(SteeringSegment(value=0.1),), lateral_feedback=False)
    frames = run_scenario(QCAR, sc, lateral=QCAR_PUBLISHED)
    vy, r = cols(frames, "lateral_speed"), cols(frames, "yaw_rate")
    assert (vy[1], r[1]) == pytest.approx((-0.0003703, -0.0036244), abs=1e-15)
    a, b, c, d, e, f = 0.7407, 0.0, 0.0, 1.1598, -0.3703, -3.6244
    hv, hr = 0.0, 0.0
    for k in range(len(frames)):
        assert vy[k] == pytest.approx(hv, rel=1e-12, abs=1e-15)
        assert r[k] == pytest.approx(hr, rel=1e-12, abs=1e-15)
        hv, hr = hv + 0.01 * (a * hv + b * hr + e * 0.1), hr + 0.01 * (c * hv + d * hr + f * 0.1)


def test_braking_threshold():
    sc = Scenario(duration=6.0, noise=QUIET, obstacles=(Obstacle(appear=1.0, distance=2.0),))
    frames = run_scenario(QCAR, sc)
    d = cols(frames, "obstacle_distance")
    v_des = cols(frames, "desired_speed")
    below = np.flatnonzero(d < 0.5)
    assert below.size > 0
    first = below[0]
    assert v_des[first] == 0.0
    assert np.all(v_des[:first] == 1.0)
    np.testing.assert_array_equal(v_des == 0.0, d < 0.5)


def test_speed_converges_within_five_time_constants():
    sc = Scenario(duration=8.0, noise=QUIET, speed=((0.0, 1.0),))
    frames = run_scenario(QCAR, sc)
    k = int(round(5 * sc.time_constant / sc.dt))
    vx = cols(frames, "longitudinal_speed")
    assert abs(vx[k] - 1.0) <= 0.01
    assert abs(vx[-1] - 1.0) <= 0.01


def test_schema_completeness_and_ranges():
    frames = run_scenario(QCAR, Scenario(duration=2.0, steering=(SteeringSegment(kind="sinusoid", amplitude=0.2, frequency=1.0),)))
    for f in frames:
        for name in FIELDS:
            assert math.isfinite(float(getattr(f, name)))
        assert 0 <= f.throttle <= 100


def test_seed_determinism():
    sc = Scenario(duration=2.0, seed=7)
    assert run_scenario(QCAR, sc) == run_scenario(QCAR, sc)
    assert run_scenario(QCAR, sc) != run_scenario(QCAR, Scenario(duration=2.0, seed=8))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(dt=0.0)
    with pytest.raises(ValueError):
        Scenario(duration=0.001, dt=0.01)
    with pytest.raises(ValueError):
        Scenario(noise={"yaw_rate": -1.0})
    with pytest.raises(ValueError):
        SteeringSegment(kind="ramp")


def test_steering_program_kinds():
    step = SteeringSegment(kind="step", before=0.0, value=0.2, step_time=1.0)
    assert step.at(0.5) == 0.0 and step.at(1.0) == 0.2
    sine = SteeringSegment(kind="sinusoid", value=0.1, amplitude=0.1, frequency=1.0)
    assert sine.at(0.25) == pytest.approx(0.2)
    sc = Scenario(steering=(SteeringSegment(value=0.0), SteeringSegment(start=2.0, value=0.3)))
    assert sc.steering_at(1.0) == 0.0 and sc.steering_at(2.0) == 0.3


# ---------------------------------------------------------------- attacks


def _frames(n=50, dt=0.1):
    times = np.round(np.arange(n) * dt, 10)
    return make_frames(times, Label.NORMAL, obstacle_distance=np.linspace(3, 1, n))


def test_empty_attack_is_noop():
    frames = _frames()
    out, log = inject_attack(frames, AttackScript())
    assert out == frames
    assert np.all(log.states == 0)


def test_total_blinding():
    frames = _frames()
    out, log = inject_attack(frames, AttackScript(((0.0, 4.9),)))
    assert all(f.obstacle_distance == 10.0 for f in out)
    assert all(f.label == Label.ABNORMAL for f in out)
    assert np.all(log.states == 1)


def test_interval_counting():
    out, log = inject_attack(_frames(), AttackScript(((1.0, 2.0),)))
    abnormal = [f.timestamp for f in out if f.label == Label.ABNORMAL]
    assert len(abnormal) == 11
    assert abnormal[0] == 1.0 and abnormal[-1] == 2.0
    assert int(log.states.sum()) == 11


def test_interval_outside_recording_rejected():
    with pytest.raises(ValueError):
        inject_attack(_frames(), AttackScript(((4.0, 6.0),)))


def test_overlapping_intervals_rejected():
    with pytest.raises(ValueError):
        AttackScript(((1.0, 2.0), (1.5, 3.0)))
    with pytest.raises(ValueError):
        AttackScript(mode="laser")


def test_frozen_and_noise_modes():
    frames = _frames()
    frozen, _ = inject_attack(frames, AttackScript(((1.0, 2.0),), mode="frozen"))
    held = [f.obstacle_distance for f in frozen if f.label == Label.ABNORMAL]
    assert len(set(held)) == 1 and held[0] == frames[9].obstacle_distance
    noisy_a, _ = inject_attack(frames, AttackScript(((1.0, 2.0),), mode="noise-burst"), seed=3)
    noisy_b, _ = inject_attack(frames, AttackScript(((1.0, 2.0),), mode="noise-burst"), seed=3)
    assert noisy_a == noisy_b
    assert all(0 <= f.obstacle_distance <= 10 for f in noisy_a)


@given(st.lists(st.tuples(st.integers(0, 49), st.integers(0, 10)), max_size=5), st.integers(0, 100))
@settings(max_examples=60)
def test_labels_agree_with_log_and_join(raw, seed):
    intervals, last = [], -1
    for start, length in sorted(raw):
        if start <= last:
            continue
        end = min(start + length, 49)
        intervals.append((round(start * 0.1, 10), round(end * 0.1, 10)))
        last = end
    out, log = inject_attack(_frames(), AttackScript(tuple(intervals)), seed)
    for f, s in zip(out, log.states):
        assert (f.label == Label.ABNORMAL) == (s == 1)
    unlabeled = [f.__class__(**{**f.__dict__, "label": Label.UNLABELED}) for f in out]
    joined = join_laser_log(unlabeled, log)
    assert [f.label for f in joined] == [f.label for f in out]


def test_blinded_car_does_not_brake():
    sc = Scenario(duration=6.0, noise=QUIET, obstacles=(Obstacle(appear=1.0, distance=2.0),))
    attack = AttackScript(((1.0, 5.99),))
    frames, log = simulate_attack(QCAR, sc, attack)
    assert all(f.desired_speed == 1.0 for f in frames)
    assert all(f.obstacle_distance == 10.0 for f in frames if f.label == Label.ABNORMAL)
    assert run_scenario(QCAR, sc)[-1].desired_speed == 0.0


def test_attacked_run_round_trips_through_files(tmp_path):
    sc = Scenario(duration=3.0, obstacles=(Obstacle(1.0, 2.0),), seed=4)
    frames, log = simulate_attack(QCAR, sc, AttackScript(((1.0, 2.0),)))
    write_frames(frames, tmp_path / "f.csv")
    write_laser_log(log, tmp_path / "l.csv")
    loaded = load_frames(tmp_path / "f.csv")
    assert loaded == frames
    relabeled = join_laser_log([f.__class__(**{**f.__dict__, "label": Label.NORMAL}) for f in loaded],
                               load_laser_log(tmp_path / "l.csv"))
    assert relabeled == frames


# ---------------------------------------------------------------- benchmark and config


def test_benchmark_size_and_determinism():
    a = synthetic_benchmark(3000, seed=5)
    b = synthetic_benchmark(3000, seed=5)
    assert sum(len(r.frames) for r in a) == 3000
    assert [r.frames for r in a] == [r.frames for r in b]
    labels = [f.label for r in a for f in r.frames]
    assert Label.ABNORMAL in labels and Label.NORMAL in labels


def test_load_scenario_file(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(
        "[vehicle]\nmass = 2.7\n\n"
        "[scenario]\nduration = 3\ndt = 0.01\nseed = 2\n\n"
        "[steering.0]\nkind = step\nvalue = 0.1\nstep_time = 1\n\n"
        "[speed]\nprogram = 0:1.0, 2:0.5\n\n"
        "[obstacle.0]\nappear = 1\ndistance = 2\n\n"
        "[noise]\nyaw_rate = 0\n\n"
        "[attack]\nintervals = 1:1.5\nmode = frozen\n"
    )
    dyn, sc, attack = load_scenario(p)
    assert sc.n_steps == 300 and sc.seed == 2
    assert sc.speed == ((0.0, 1.0), (2.0, 0.5))
    assert sc.noise["yaw_rate"] == 0.0 and sc.noise["obstacle_distance"] == 0.02
    assert attack.intervals == ((1.0, 1.5),) and attack.mode == "frozen"
    assert sc.steering_at(0.5) == 0.0 and sc.steering_at(1.5) == 0.1


def test_load_scenario_rejects_zero_dt(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[scenario]\ndt = 0\n")
    with pytest.raises(ValueError):
        load_scenario(p)
