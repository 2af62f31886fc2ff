import numpy as np
import pytest
from scipy import ndimage

from gprrecon.autodiff import ShapeError, ops, Tensor
from gprrecon.kinematics import ScanLine
from gprrecon.migration import (
    MigratedImage, MigrationNet, MigrationTrainConfig, backproject, backproject_sum, threshold_to_cross_section,
    train_migrationnet, prepare_pair, pixel_accuracy, read_grid, write_grid, normalize_bscan,
)
from gprrecon.scene import (BScan, GridSpec, Pipe, PipeScene, CrossSection, synthesize_bscan, perpendicular_pipe_scene,
                            ground_truth_cross_section, FormatError)

LINE = ScanLine((0.0, 1.0), (2.0, 1.0), 2 / 255)
GRID = GridSpec(128, 128, 2 / 128)


def point_scene(x, depth, eps=6.25, r=0.01):
    return PipeScene((2.0, 2.0, 0.5), eps, [Pipe((x, 0.0, -depth), (x, 2.0, -depth), r)])


def top_cell(scene, pipe=0):
    p = scene.pipes[pipe]
    return (-p.start[2] - p.radius) / GRID.cell, p.start[0] / GRID.cell


def test_point_scatterer_argmax():
    scene = point_scene(0.83, 0.27)
    image = backproject(synthesize_bscan(scene, LINE), GRID, scene.eps_r)
    i, j = image.argmax()
    ti, tj = top_cell(scene)
    assert abs(i - ti) <= 1 and abs(j - tj) <= 1
    assert np.all(image.values >= 0) and np.all(np.isfinite(image.values))


def test_zero_bscan_zero_image():
    b = BScan(np.zeros((256, 256)), 0.05, synthesize_bscan(point_scene(1, 0.2), LINE).poses, LINE.trace_spacing)
    for mode in ("abs", "coherent"):
        assert not backproject(b, GRID, 6.0, mode).values.any()


def test_two_scatterers_two_maxima():
    scene = PipeScene((2.0, 2.0, 0.5), 6.25, [
        Pipe((0.5, 0.0, -0.2), (0.5, 2.0, -0.2), 0.01),
        Pipe((1.4, 0.0, -0.32), (1.4, 2.0, -0.32), 0.01),
    ])
    image = backproject(synthesize_bscan(scene, LINE), GRID, scene.eps_r, "coherent").values
    # oracle: local maxima above half the global peak
    peaks = (image == ndimage.maximum_filter(image, size=9)) & (image >= 0.5 * image.max())
    found = np.argwhere(peaks)
    assert len(found) == 2
    for k in range(2):
        ti, tj = top_cell(scene, k)
        assert np.min(np.max(np.abs(found - [ti, tj]), axis=1)) <= 1


def test_linearity_signed_and_rectified():
    s1, s2 = point_scene(0.6, 0.2), point_scene(1.3, 0.35)
    b1, b2 = synthesize_bscan(s1, LINE), synthesize_bscan(s2, LINE)
    both = BScan(b1.amplitudes + b2.amplitudes, b1.dt, b1.poses, b1.trace_spacing)
    lhs = backproject_sum(both, GRID, 6.25)
    np.testing.assert_allclose(lhs, backproject_sum(b1, GRID, 6.25) + backproject_sum(b2, GRID, 6.25),
                               atol=1e-9, rtol=0)
    # |.| summation is linear on non-negative records
    p1 = BScan(np.abs(b1.amplitudes), b1.dt, b1.poses, b1.trace_spacing)
    p2 = BScan(np.abs(b2.amplitudes), b1.dt, b1.poses, b1.trace_spacing)
    p12 = BScan(p1.amplitudes + p2.amplitudes, b1.dt, b1.poses, b1.trace_spacing)
    np.testing.assert_allclose(backproject(p12, GRID, 6.25).values,
                               backproject(p1, GRID, 6.25).values + backproject(p2, GRID, 6.25).values,
                               atol=1e-9, rtol=0)


def test_translation_equivariance():
    base_x = 0.7
    ref = backproject(synthesize_bscan(point_scene(base_x, 0.25), LINE), GRID, 6.25).argmax()
    for k in (3, 10, 25):
        shifted = backproject(synthesize_bscan(point_scene(base_x + k * GRID.cell, 0.25), LINE), GRID, 6.25).argmax()
        assert abs(shifted[1] - ref[1] - k) <= 1
        assert abs(shifted[0] - ref[0]) <= 1


def test_unknown_mode():
    with pytest.raises(ValueError):
        backproject(synthesize_bscan(point_scene(1, 0.2), LINE), GRID, 6.0, "kirchhoff")


# --- thresholding -----------------------------------------------------------------

def test_threshold_blob_contains_argmax():
    scene = point_scene(1.1, 0.3)
    image = backproject(synthesize_bscan(scene, LINE), GRID, scene.eps_r, "coherent")
    cs = threshold_to_cross_section(image, 0.5)
    labels, _ = ndimage.label(cs.mask)
    i, j = image.argmax()
    assert cs.mask[i, j] == 1 and labels[i, j] > 0
    cy, cx = ndimage.center_of_mass(cs.mask)
    ti, tj = top_cell(scene)
    assert abs(cy - ti) <= 2 and abs(cx - tj) <= 2


def test_threshold_monotone():
    image = MigratedImage(np.random.default_rng(0).random((32, 32)), 0.01)
    prev = threshold_to_cross_section(image, 0.1).mask
    for f in np.linspace(0.2, 0.99, 9):
        cur = threshold_to_cross_section(image, f).mask
        assert np.all(cur <= prev)
        prev = cur


def test_threshold_zero_image_and_bad_fraction():
    image = MigratedImage(np.zeros((8, 8)), 0.01)
    assert not threshold_to_cross_section(image).mask.any()
    for f in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            threshold_to_cross_section(image, f)


# --- grid files ------------------------------------------------------------------

def test_grid_file_round_trip(tmp_path):
    image = MigratedImage(np.random.default_rng(1).random((16, 24)).astype(np.float32), 0.015, (0.0, 0.4, 0.0))
    n = write_grid(image, tmp_path / "a.gprc")
    assert n == 46 + 16 * 24 * 4
    back = read_grid(tmp_path / "a.gprc")
    assert back.values.tobytes() == image.values.tobytes() and back.pose == image.pose and back.cell == 0.015
    mask = CrossSection((image.values > 0.5).astype(np.uint8), 0.02, (0.2, 0.0, 0.0), (0.0, 1.0))
    write_grid(mask, tmp_path / "m.gprc")
    mb = read_grid(tmp_path / "m.gprc")
    assert isinstance(mb, CrossSection) and mb.direction == (0.0, 1.0)
    np.testing.assert_array_equal(mb.mask, mask.mask)


def test_grid_file_errors(tmp_path):
    p = tmp_path / "x.gprc"
    p.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(FormatError, match="bad magic"):
        read_grid(p)
    write_grid(MigratedImage(np.ones((4, 4)), 0.1), p)
    p.write_bytes(p.read_bytes() + b"\0")
    with pytest.raises(FormatError, match="expected"):
        read_grid(p)
    with pytest.raises(ValueError):
        write_grid(MigratedImage(np.ones((4, 4)), 0.1, direction=(0.6, 0.8)), p)


# --- MigrationNet --------------------------------------------------------------------

def test_net_shape_and_range():
    net = MigrationNet(width=8, seed=0)
    p = net.predict_proba(np.random.default_rng(0).random((128, 128)))
    assert p.shape == (128, 128)
    assert np.all((p > 0) & (p < 1))


def test_branches_meet_at_eighth_resolution():
    net = MigrationNet(width=32, seed=1)
    outs, _ = net.encode(Tensor(np.random.default_rng(0).random((1, 128, 128))))
    assert [o.shape for o in outs] == [(32, 16, 16)] * 3
    assert ops.concat(outs, axis=0).shape == (96, 16, 16)


@pytest.mark.parametrize("shape", [(8, 8), (16, 40), (64, 24)])
def test_net_shape_contract(shape):
    assert MigrationNet(width=4).predict_proba(np.zeros(shape)).shape == shape


def test_net_rejects_bad_size():
    with pytest.raises(ShapeError, match="pad by 3 rows and 0 columns"):
        MigrationNet(width=4).forward(np.zeros((125, 128)))


def test_perfect_prediction_bce():
    mask = (np.random.default_rng(0).random((16, 16)) > 0.7).astype(float)
    assert float(ops.binary_cross_entropy(Tensor(mask), mask).data) <= 1e-6


def small_pair(seed=0, n=32):
    rng = np.random.default_rng(seed)
    scene = perpendicular_pipe_scene(rng, extents=(0.5, 0.5, 0.5), radius=0.06)
    line = ScanLine((0.0, 0.25), (0.5, 0.25), 0.5 / 63)
    b = synthesize_bscan(scene, line, n_samples=64)
    return b, ground_truth_cross_section(scene, line, GridSpec(n, n, 0.5 / n))


def test_single_pair_loss_decreases():
    b, cs = small_pair()
    res = train_migrationnet(MigrationNet(width=8, seed=0), [(b, cs)],
                             MigrationTrainConfig(epochs=100, learning_rate=5e-4))
    losses = np.array(res.step_losses)
    assert len(losses) == 100
    assert np.sum(np.diff(losses) >= 0) <= 5
    assert losses[-1] < losses[0]


def test_shuffle_changes_order_not_outcome():
    data = [small_pair(s) for s in range(3)]
    runs = {}
    for shuffle in (True, False):
        model = MigrationNet(width=8, seed=0)
        res = train_migrationnet(model, data, MigrationTrainConfig(epochs=30, learning_rate=2e-3, shuffle=shuffle))
        acc = np.mean([pixel_accuracy(model.predict_proba(x), y) for x, y in (prepare_pair(b, m) for b, m in data)])
        runs[shuffle] = (res.step_losses, acc)
    assert runs[True][0] != runs[False][0]
    assert abs(runs[True][1] - runs[False][1]) <= 0.02


def test_train_rejects_bad_dataset():
    with pytest.raises(ValueError):
        train_migrationnet(MigrationNet(width=4), [])
    b, cs = small_pair()
    _, cs2 = small_pair(n=16)
    with pytest.raises(ValueError):
        train_migrationnet(MigrationNet(width=4), [(b, cs), (b, cs2)])


def test_nan_loss_aborts_with_checkpoint(tmp_path):
    from gprrecon.autodiff import NumericalError, load_checkpoint
    b, cs = small_pair()
    net = MigrationNet(width=4, seed=0)
    before = net.state_dict()
    net.head2.bias.data[:] = np.nan
    bad = net.state_dict()
    ckpt = tmp_path / "last.gprn"
    with pytest.raises(NumericalError):
        train_migrationnet(net, [(b, cs)], MigrationTrainConfig(epochs=1, checkpoint_path=str(ckpt)))
    saved = load_checkpoint(ckpt)
    assert set(saved) == set(before)
    np.testing.assert_array_equal(saved["enc0.group0.conv1.weight"], bad["enc0.group0.conv1.weight"])


def test_normalize_bscan():
    a = np.array([[1.0, 3.0], [5.0, -3.0]])
    n = normalize_bscan(a)
    assert n.min() == 0.0 and n.max() == 1.0
    assert not normalize_bscan(np.full((4, 4), 2.0)).any()
    assert normalize_bscan(np.ones((64, 32)) * np.arange(32), (16, 16)).shape == (16, 16)
