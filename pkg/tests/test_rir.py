from dataclasses import replace

import numpy as np
import pytest

from rir.image_method import image_method_rir, load_rir, make_rir_set, rir_to_frame, save_rir
from rir.room import RoomSpec, absorption, min_rt60, sample_room, sample_room_set, volume_and_surface
from rir.rt60 import estimate_rt60, schroeder_curve
from utils.errors import DataError, NumericalError


def check_recipe(spec: RoomSpec):
    assert spec.constraint_violations() == []
    assert np.all(np.array(spec.dims) >= (6.36, 4.544, 3.6))
    assert np.all(np.array(spec.dims) <= (9.54, 6.816, 5.4))
    assert 0.4 <= spec.rt60 <= 1.99
    assert 1.0 <= spec.src[2] <= 2.0 and 1.0 <= spec.mic[2] <= 2.0


def test_sampled_rooms_satisfy_the_recipe():
    rng = np.random.default_rng(3)
    for _ in range(500):
        check_recipe(sample_room(rng))


@pytest.mark.slow
def test_ten_thousand_rooms_satisfy_the_recipe():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        check_recipe(sample_room(rng))


def test_room_set_is_seeded():
    first = sample_room_set(seed=11, count=4)
    second = sample_room_set(seed=11, count=4)
    assert first == second
    assert first != sample_room_set(seed=12, count=4)


def test_cube_room_is_infeasible():
    with pytest.raises(DataError, match="infeasible"):
        sample_room(np.random.default_rng(0), nominal_dims=(2.5, 2.5, 2.5))


def test_absorption_limits(room):
    alpha = absorption(room.dims, 0.6)
    assert 0 < alpha < 1
    assert absorption(room.dims, 0.6, model="eyring") < alpha

    with pytest.raises(NumericalError, match="unreachable"):
        absorption(room.dims, 0.5 * min_rt60(room.dims))


def test_full_absorption_reaches_the_anechoic_limit(room):
    volume, surface = volume_and_surface((2.0, 3.0, 4.0))
    assert (volume, surface) == (24.0, 52.0)

    assert absorption(room.dims, min_rt60(room.dims)) == pytest.approx(1.0, abs=1e-12)


def test_room_spec_rejects_points_outside(room):
    with pytest.raises(DataError):
        replace(room, mic=(9.0, 1.0, 1.0))


def test_direct_path_arrives_first(rir, room):
    expected = int(round(room.distance / 343.0 * 16000))
    assert abs(rir.first_arrival - expected) <= 2
    assert rir.direct_delay == expected
    assert len(rir) == int(np.ceil(1.2 * room.rt60 * 16000))


def test_fractional_delay_keeps_the_arrival(room):
    rir = image_method_rir(room, fractional_delay=True)
    peak = int(np.argmax(np.abs(rir.taps[: rir.direct_delay + 20])))
    assert abs(peak - rir.direct_delay) <= 2


def test_fractional_delay_never_arrives_early():
    for spec in sample_room_set(seed=8, count=20):
        rir = image_method_rir(replace(spec, max_rir_len=1600), fractional_delay=True)
        assert abs(rir.first_arrival - rir.direct_delay) <= 2, f"{spec} arrives at {rir.first_arrival}"


def test_rt60_estimate_of_a_constructed_decay():
    fs = 16000
    t = np.arange(int(1.5 * fs)) / fs
    taps = np.random.default_rng(0).normal(size=t.size) * np.exp(-6.9078 * t / 0.8)
    assert estimate_rt60(taps, sample_rate=fs) == pytest.approx(0.8, rel=0.02)


@pytest.mark.parametrize("rt60", [0.6, 1.0])
def test_simulated_rt60_is_close_to_target(room, rt60):
    rir = image_method_rir(replace(room, rt60=rt60, max_rir_len=None))
    assert estimate_rt60(rir) == pytest.approx(rt60, rel=0.2)


def rt60_within(spec: RoomSpec, tolerance: float = 0.2) -> bool:
    try:
        return abs(estimate_rt60(image_method_rir(spec)) - spec.rt60) <= tolerance * spec.rt60
    except NumericalError:
        return False


@pytest.mark.slow
def test_rt60_of_sampled_rooms():
    rng = np.random.default_rng(5)
    specs = [
        replace(spec, rt60=float(rng.uniform(0.4, 1.0)), max_rir_len=None)
        for spec in sample_room_set(seed=5, count=100)
    ]
    hits = sum(rt60_within(spec) for spec in specs)
    assert hits >= 90, f"only {hits} of 100 rooms within 20% of their target RT60"


def test_rt60_needs_enough_decay():
    with pytest.raises(NumericalError, match="insufficient decay"):
        estimate_rt60(np.ones(100), sample_rate=16000)


def test_schroeder_curve_starts_at_zero_db(rir):
    curve = schroeder_curve(rir.taps)
    assert curve[0] == 0.0
    assert np.all(np.diff(curve) <= 1e-12)


def test_unique_assignment_needs_enough_rirs():
    with pytest.raises(DataError, match="without replacement"):
        make_rir_set(seed=0, count=5, utterance_count=10)


def test_rir_file_round_trip(tmp_path, rir):
    save_rir(rir, tmp_path / "rir.ncir")
    restored = load_rir(tmp_path / "rir.ncir")

    assert restored.spec == rir.spec
    np.testing.assert_array_equal(restored.taps, rir.taps.astype(np.float32))


def test_rir_frame(rir):
    frame = rir_to_frame(rir)
    assert list(frame.columns) == ["sample", "time_s", "amplitude"]
    assert len(frame) == len(rir)
