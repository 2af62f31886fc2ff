import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gprrecon.dataset import make_dataset
from gprrecon.estimators import BackProjectionMigrator, GPRNetCompleter, MigrationNetSegmenter
from gprrecon.kinematics import ScanLine
from gprrecon.scene import GridSpec, Pipe, PipeScene, CrossSection, ground_truth_cross_section, synthesize_bscan


@pytest.fixture(scope="module")
def scan():
    scene = PipeScene((0.5, 0.5, 0.5), 6.25, [Pipe((0.25, 0.0, -0.2), (0.25, 0.5, -0.2), 0.05)])
    line = ScanLine((0.0, 0.25), (0.5, 0.25), 0.5 / 63)
    b = synthesize_bscan(scene, line, n_samples=64)
    return scene, b, ground_truth_cross_section(scene, line, GridSpec(32, 32, 0.5 / 32))


def test_params_round_trip():
    est = GPRNetCompleter(epochs=3, learning_rate=1e-3)
    params = est.get_params()
    assert params["epochs"] == 3 and params["learning_rate"] == 1e-3
    assert clone(est).get_params() == params
    est.set_params(batch_size=4)
    assert est.batch_size == 4
    assert BackProjectionMigrator(eps_r=4.0).get_params()["mode"] == "coherent"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GPRNetCompleter().predict(np.zeros((1, 1500, 3)))
    with pytest.raises(NotFittedError):
        BackProjectionMigrator(eps_r=4.0).transform([])


def test_bpa_migrator(scan):
    scene, b, _ = scan
    sections = BackProjectionMigrator(eps_r=scene.eps_r, height=32, width=32).fit().transform([b])
    assert len(sections) == 1 and isinstance(sections[0], CrossSection)
    assert sections[0].mask.shape == (32, 32) and sections[0].mask.any()
    with pytest.raises(ValueError):
        BackProjectionMigrator().fit()
    with pytest.raises(TypeError):
        BackProjectionMigrator(eps_r=4.0).fit().transform([np.zeros((4, 4))])


def test_segmenter(scan):
    _, b, cs = scan
    seg = MigrationNetSegmenter(width=4, epochs=3, learning_rate=1e-3).fit([b], [cs])
    probs = seg.predict_proba([b])
    assert probs[0].shape == (32, 32) and np.all((probs[0] > 0) & (probs[0] < 1))
    assert seg.predict([b])[0].dtype == np.uint8
    assert seg.transform([b])[0].mask.shape == (32, 32)
    assert len(seg.history_.step_losses) == 3
    with pytest.raises(ValueError):
        MigrationNetSegmenter().fit([b], [cs, cs])


def test_completer_fit_predict_score():
    data = make_dataset(2, seed=8)
    X = np.stack([s.sparse for s in data])
    y = [s.dense for s in data]
    est = GPRNetCompleter(epochs=1, batch_size=2, learning_rate=1e-3).fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (2, 8064, 3)
    assert np.array_equal(est.transform(X), pred)
    assert est.score(X, y) < 0
    assert est.predict_one(X[0]).shape == (8064, 3)
    wrapped = GPRNetCompleter.from_model(est.model_)
    assert np.array_equal(wrapped.predict(X[:1]), pred[:1])


def test_completer_validation():
    est = GPRNetCompleter(epochs=1)
    with pytest.raises(ValueError, match="1500"):
        est.fit([np.zeros((10, 3))], [np.zeros((10, 3))])
    with pytest.raises(ValueError, match="batch"):
        est.fit(np.zeros((1500, 3)), [np.zeros((10, 3))])
    with pytest.raises(ValueError):
        est.fit([np.full((1500, 3), np.nan)], [np.zeros((10, 3))])
