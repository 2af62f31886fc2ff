import math

import numpy as np
import pytest
from scipy import ndimage

from gprrecon.kinematics import ScanLine, drive_line
from gprrecon.scene import (
    Pipe, PipeScene, GridSpec, BScan, C_M_PER_NS, eps_for_velocity, two_way_travel_time, synthesize_bscan,
    ground_truth_cross_section, ground_truth_dense_cloud, add_gaussian_noise, parse_scene, format_scene,
    read_scene, write_scene, read_bscan, write_bscan, FormatError, demo_scene, perpendicular_pipe_scene,
    first_arrival_times,
)

EPS_V01 = eps_for_velocity(0.1)  # ~8.988


def test_velocity_constant():
    assert EPS_V01 == pytest.approx((0.299792458 / 0.1) ** 2)
    assert C_M_PER_NS == 0.299792458


def test_travel_time_vertical():
    assert two_way_travel_time(0.0, (0.0, 0.5), EPS_V01) == pytest.approx(10.0, rel=1e-12)


def test_travel_time_offset():
    assert two_way_travel_time(0.5, (0.0, 0.5), EPS_V01) == pytest.approx(2 * math.sqrt(0.5) / 0.1, rel=1e-12)
    assert two_way_travel_time(0.5, (0.0, 0.5), EPS_V01) == pytest.approx(14.1421, abs=1e-4)


def test_travel_time_minimum_at_apex():
    xs = np.linspace(-1, 1, 2001)
    t = two_way_travel_time(xs, (0.3, 0.4), 6.0)
    assert xs[np.argmin(t)] == pytest.approx(0.3, abs=1e-12)


def test_travel_time_errors():
    with pytest.raises(ValueError):
        two_way_travel_time(0.0, (0.0, 0.5), 0.5)
    with pytest.raises(ValueError):
        two_way_travel_time(0.0, (0.0, 0.0), 4.0)


def perpendicular_scene(x=0.9, depth=0.25, r=0.03, eps=6.25):
    return PipeScene((2.0, 1.0, 0.5), eps, [Pipe((x, 0.0, -depth), (x, 1.0, -depth), r)])


LINE = ScanLine((0.0, 0.5), (2.0, 0.5), 2.0 / 255)


def test_single_pipe_hyperbola_matches_travel_time():
    scene = perpendicular_scene()
    b = synthesize_bscan(scene, LINE, dt=0.1)  # window long enough for the far limbs
    # oracle: per-column peak of |amplitude| (Ricker centre) vs nearest-surface point travel time
    peak_t = np.argmax(np.abs(b.amplitudes), axis=0) * b.dt
    ax = b.positions[:, 0]
    pipe = scene.pipes[0]
    depth = -pipe.start[2]
    dist = np.hypot(ax - pipe.start[0], depth)
    near_x = pipe.start[0] + (ax - pipe.start[0]) * pipe.radius / dist
    near_z = depth - depth * pipe.radius / dist
    expected = np.array([two_way_travel_time(a, (nx, nz), scene.eps_r) for a, nx, nz in zip(ax, near_x, near_z)])
    assert np.max(np.abs(peak_t - expected)) <= b.dt
    # samples are quantised, so the bottom of the curve is a plateau; take its midpoint
    apex_x = ax[peak_t == peak_t.min()].mean()
    assert abs(apex_x - pipe.start[0]) <= LINE.trace_spacing


def test_empty_scene_zero_bscan():
    scene = PipeScene((2.0, 1.0, 0.5), 6.0, [])
    b = synthesize_bscan(scene, LINE)
    assert b.amplitudes.shape == (256, 256) and not b.amplitudes.any()


def test_parallel_pipe_flat_band():
    offset, depth, r = 0.2, 0.25, 0.03
    scene = PipeScene((2.0, 1.0, 0.5), 6.25, [Pipe((0.0, 0.5 + offset, -depth), (2.0, 0.5 + offset, -depth), r)])
    b = synthesize_bscan(scene, LINE)
    peak_t = np.argmax(np.abs(b.amplitudes), axis=0) * b.dt
    expected = 2 * (math.hypot(offset, depth) - r) / scene.velocity
    assert np.ptp(peak_t) == 0.0
    assert abs(peak_t[0] - expected) <= b.dt


def test_apex_property_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        scene = perpendicular_pipe_scene(rng, extents=(2.0, 1.0, 0.5))
        b = synthesize_bscan(scene, LINE, dt=0.1)
        first = first_arrival_times(scene, b)[0]
        peak = np.argmax(np.abs(b.amplitudes), axis=0)
        apex_x = b.positions[peak == peak.min(), 0].mean()
        assert abs(apex_x - scene.pipes[0].start[0]) <= LINE.trace_spacing
        assert abs(b.positions[np.argmin(first), 0] - scene.pipes[0].start[0]) <= LINE.trace_spacing


def test_bscan_linearity():
    a = Pipe((0.5, 0.0, -0.2), (0.5, 1.0, -0.2), 0.04)
    c = Pipe((1.4, 0.0, -0.35), (1.5, 1.0, -0.35), 0.02, "pvc")
    ext, eps = (2.0, 1.0, 0.5), 7.0
    dt = 0.05
    both = synthesize_bscan(PipeScene(ext, eps, [a, c]), LINE, dt=dt).amplitudes
    sa = synthesize_bscan(PipeScene(ext, eps, [a]), LINE, dt=dt).amplitudes
    sc = synthesize_bscan(PipeScene(ext, eps, [c]), LINE, dt=dt).amplitudes
    assert both.tobytes() == (sa + sc).tobytes()


def test_survey_off_slab_rejected():
    with pytest.raises(ValueError, match="leaves the slab"):
        synthesize_bscan(perpendicular_scene(), ScanLine((0.0, 0.5), (2.5, 0.5), 0.05))


def test_bscan_deterministic():
    scene = demo_scene()
    line = ScanLine((0.0, 1.0), (2.0, 1.0), 2 / 255)
    assert synthesize_bscan(scene, line).amplitudes.tobytes() == synthesize_bscan(scene, line).amplitudes.tobytes()


# --- cross-sections ----------------------------------------------------------------

def test_cross_section_disk_area():
    r, cell = 0.05, 0.005
    scene = PipeScene((1.0, 1.0, 0.5), 6.0, [Pipe((0.5, 0.0, -0.2), (0.5, 1.0, -0.2), r)])
    cs = ground_truth_cross_section(scene, ScanLine((0.0, 0.5), (1.0, 0.5), 0.01), GridSpec(100, 200, cell))
    area = cs.mask.sum() * cell ** 2
    ring = 2 * math.pi * r * cell
    assert abs(area - math.pi * r ** 2) <= ring


def test_cross_section_miss():
    scene = PipeScene((1.0, 1.0, 0.5), 6.0, [Pipe((0.5, 0.0, -0.2), (0.5, 0.4, -0.2), 0.05)])
    cs = ground_truth_cross_section(scene, ScanLine((0.0, 0.8), (1.0, 0.8), 0.01), GridSpec(100, 200, 0.005))
    assert not cs.mask.any()


def test_cross_section_two_components():
    scene = PipeScene((1.0, 1.0, 0.5), 6.0, [
        Pipe((0.3, 0.0, -0.1), (0.3, 1.0, -0.1), 0.04),
        Pipe((0.7, 0.0, -0.35), (0.7, 1.0, -0.35), 0.05),
    ])
    cs = ground_truth_cross_section(scene, ScanLine((0.0, 0.5), (1.0, 0.5), 0.01), GridSpec(100, 200, 0.005))
    _, n = ndimage.label(cs.mask)
    assert n == 2


def _area_error(cell, centres):
    r = 0.05
    errs = []
    for cx, cz in centres:
        scene = PipeScene((1.0, 1.0, 0.5), 6.0, [Pipe((cx, 0.0, -cz), (cx, 1.0, -cz), r)])
        grid = GridSpec(int(0.45 / cell), int(1.0 / cell), cell)
        cs = ground_truth_cross_section(scene, ScanLine((0.0, 0.5), (1.0, 0.5), 0.01), grid)
        errs.append(abs(cs.mask.sum() * cell ** 2 - math.pi * r ** 2))
    return float(np.mean(errs))


def test_cross_section_area_converges():
    centres = np.random.default_rng(4).uniform([0.4, 0.15], [0.6, 0.3], size=(12, 2))
    coarse = _area_error(0.01, centres)
    fine = _area_error(0.0025, centres)
    assert fine <= coarse / 2


# --- dense cloud -------------------------------------------------------------------------

def test_dense_cloud_on_surface():
    pipe = Pipe((0.2, 0.0, -0.2), (0.8, 1.0, -0.25), 0.04)
    cloud = ground_truth_dense_cloud(PipeScene((1.0, 1.0, 0.5), 6.0, [pipe]), 8064, seed=1)
    assert cloud.shape == (8064, 3)
    assert np.max(np.abs(pipe.distance_to_axis(cloud) - pipe.radius)) < 1e-9


def test_dense_cloud_area_split():
    # same length, radius 2:1 -> area 2:1
    big = Pipe((0.3, 0.0, -0.2), (0.3, 1.0, -0.2), 0.06)
    small = Pipe((0.7, 0.0, -0.2), (0.7, 1.0, -0.2), 0.03)
    cloud = ground_truth_dense_cloud(PipeScene((1.0, 1.0, 0.5), 6.0, [big, small]), 8064, seed=2)
    n_big = int(np.sum(big.distance_to_axis(cloud) < 1e-6 + big.radius))
    n_small = 8064 - n_big
    assert abs(n_big / n_small - 2.0) <= 0.05 * 2.0


def test_dense_cloud_empty_rejected():
    with pytest.raises(ValueError):
        ground_truth_dense_cloud(PipeScene((1.0, 1.0, 0.5), 6.0, []))


def test_dense_cloud_deterministic():
    s = demo_scene()
    assert ground_truth_dense_cloud(s, seed=3).tobytes() == ground_truth_dense_cloud(s, seed=3).tobytes()


# --- noise -------------------------------------------------------------------------------

def test_noise_zero_sigma_identity():
    x = np.random.default_rng(0).normal(size=(100, 3))
    y = add_gaussian_noise(x, 0.0, seed=5)
    assert y is not x and y.tobytes() == x.tobytes()


def test_noise_statistics():
    y = add_gaussian_noise(np.zeros(100_000), 0.1, seed=7)
    assert 0.099 <= y.std() <= 0.101
    assert abs(y.mean()) < 0.002


def test_noise_seeded():
    x = np.zeros((50, 3))
    assert add_gaussian_noise(x, 0.2, 3).tobytes() == add_gaussian_noise(x, 0.2, 3).tobytes()
    assert add_gaussian_noise(x, 0.2, 3).tobytes() != add_gaussian_noise(x, 0.2, 4).tobytes()


def test_noise_on_bscan_and_negative_sigma():
    b = synthesize_bscan(demo_scene(), ScanLine((0.0, 1.0), (2.0, 1.0), 0.05), n_samples=64)
    nb = add_gaussian_noise(b, 0.01, seed=1)
    assert isinstance(nb, BScan) and nb.amplitudes.shape == b.amplitudes.shape
    assert not np.array_equal(nb.amplitudes, b.amplitudes)
    with pytest.raises(ValueError):
        add_gaussian_noise(b, -0.1)


# --- scene validation and files ------------------------------------------------------------

def test_scene_invariants():
    with pytest.raises(ValueError):
        PipeScene((1.0, 1.0, 0.5), 0.9, [])
    with pytest.raises(ValueError):
        Pipe((0, 0, -0.1), (1, 0, -0.1), 0.0)
    with pytest.raises(ValueError, match="outside"):
        PipeScene((1.0, 1.0, 0.5), 4.0, [Pipe((0.5, 0, -0.1), (1.5, 1, -0.1), 0.02)])
    with pytest.raises(ValueError, match="depth"):
        PipeScene((1.0, 1.0, 0.5), 4.0, [Pipe((0.5, 0, -0.01), (0.5, 1, -0.01), 0.02)])


def test_scene_text_round_trip(tmp_path):
    scene = demo_scene()
    write_scene(scene, tmp_path / "s.txt")
    back = read_scene(tmp_path / "s.txt")
    assert back.extents == scene.extents and back.eps_r == scene.eps_r and back.pipes == scene.pipes
    assert format_scene(back) == format_scene(scene)


@pytest.mark.parametrize("text, lineno", [
    ("slab 1 1 0.5 4\npipe 0.5 0 -0.1 0.5 1\n", 2),
    ("slab 1 1 0.5\n", 1),
    ("slab 1 1 0.5 4\n\nbogus 1 2\n", 3),
    ("slab 1 1 0.5 4\npipe 0.5 0 -0.1 0.5 1 -0.1 abc metal\n", 2),
])
def test_scene_parse_errors(text, lineno):
    with pytest.raises(FormatError, match=f":{lineno}:"):
        parse_scene(text)


def test_bscan_file_round_trip(tmp_path):
    line = ScanLine((0.0, 1.0), (2.0, 1.0), 2 / 255)
    b = synthesize_bscan(demo_scene(), line)
    n = write_bscan(b, tmp_path / "a.gprb")
    assert n == 28 + 24 * b.n_traces + 4 * b.amplitudes.size
    back = read_bscan(tmp_path / "a.gprb")
    assert back.dt == b.dt and back.trace_spacing == b.trace_spacing
    np.testing.assert_array_equal(back.positions, b.positions)
    np.testing.assert_array_equal(back.amplitudes, b.amplitudes.astype(np.float32))
    write_bscan(back, tmp_path / "b.gprb")
    assert (tmp_path / "a.gprb").read_bytes() == (tmp_path / "b.gprb").read_bytes()


def test_bscan_file_errors(tmp_path):
    p = tmp_path / "x.gprb"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(FormatError, match="bad magic"):
        read_bscan(p)
    b = synthesize_bscan(demo_scene(), ScanLine((0.0, 1.0), (2.0, 1.0), 0.1), n_samples=16)
    write_bscan(b, p)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(FormatError, match="expected"):
        read_bscan(p)
