import numpy as np
import pytest

from fwelnet.cv import cv_elnet, cv_fwelnet, make_folds
from fwelnet.data import Dataset
from fwelnet.multitask import multitask_fit, side_information
from fwelnet.simulate import SimConfig, generate


def _pair(seed, n=80, p=20):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    b1 = np.zeros(p)
    b1[:4] = [3.0, -3.0, 1.0, 1.0]
    b2 = np.zeros(p)
    b2[:4] = [2.0, 2.0, -1.0, 0.0]
    y1 = x @ b1 + 2.0 * rng.standard_normal(n)
    y2 = x @ b2 + 2.0 * rng.standard_normal(n)
    return x, y1, y2


def test_side_information():
    np.testing.assert_array_equal(side_information([-2.0, 0.0, 1.5]), [[2.0, 1.0], [0.0, 1.0], [1.5, 1.0]])


def test_snapshots_and_shapes():
    x, y1, y2 = _pair(0)
    res = multitask_fit(x, y1, y2, n_outer=2, nfolds=4, n_lambda=25)
    assert len(res.snapshots) == 3
    assert len(res.thetas1) == len(res.thetas2) == 2
    np.testing.assert_array_equal(res.snapshots[-1][0], res.beta1)
    np.testing.assert_array_equal(res.snapshots[-1][1], res.beta2)
    p1, p2 = res.predict(x)
    assert p1.shape == p2.shape == (80,)
    assert res.cv1 is not None and res.cv2 is not None


def test_zero_coefficients_reduce_to_elastic_net():
    x, _, y2 = _pair(1)
    d = Dataset(x, y2)
    folds = make_folds(d.n, 4, seed=3)
    plain, cvp = cv_elnet(d, folds=folds, n_lambda=25)
    fw, cvf = cv_fwelnet(d, side_information(np.zeros(x.shape[1])), folds=folds, n_lambda=25)
    np.testing.assert_array_equal(fw.fit.betas, plain.betas)
    np.testing.assert_array_equal(cvf.mean_metric, cvp.mean_metric)
    assert cvf.index_min == cvp.index_min


def test_pure_noise_response_gives_plain_update():
    rng = np.random.default_rng(3)
    x, _, y2 = _pair(3)
    y1 = rng.standard_normal(x.shape[0]) * 0.01 + 5.0
    folds = make_folds(x.shape[0], 4, seed=0)
    res = multitask_fit(x, y1, y2, n_outer=1, folds=folds, n_lambda=25)
    np.testing.assert_array_equal(res.snapshots[0][0], 0.0)
    plain, cvp = cv_elnet(Dataset(x, y2), folds=folds, n_lambda=25)
    b0, beta = plain.coef_path()
    np.testing.assert_array_equal(res.snapshots[1][1], beta[:, cvp.index_min])


def test_identical_responses_share_start():
    x, y1, _ = _pair(3)
    res = multitask_fit(x, y1, y1.copy(), n_outer=1, nfolds=4, n_lambda=20)
    np.testing.assert_array_equal(res.snapshots[0][0], res.snapshots[0][1])
    assert res.start_intercepts[0] == res.start_intercepts[1]


def test_deterministic():
    x, y1, y2 = _pair(4)
    a = multitask_fit(x, y1, y2, n_outer=2, nfolds=4, seed=5, n_lambda=20)
    b = multitask_fit(x, y1, y2, n_outer=2, nfolds=4, seed=5, n_lambda=20)
    np.testing.assert_array_equal(a.beta1, b.beta1)
    np.testing.assert_array_equal(a.beta2, b.beta2)
    for (u1, u2), (v1, v2) in zip(a.snapshots, b.snapshots):
        np.testing.assert_array_equal(u1, v1)
        np.testing.assert_array_equal(u2, v2)


def test_generator_responses():
    sim = generate(SimConfig("multitask", n_runs=1, n_test=500), 0)
    assert sim.train.n == 150 and sim.train.p == 50
    assert np.sum(sim.beta**2) / sim.sigma**2 == pytest.approx(0.5)
    assert np.sum(sim.beta2**2) / sim.sigma2**2 == pytest.approx(1.5)
    # shared first five features, distinct second blocks
    assert np.all(sim.beta[:5] != 0) and np.all(sim.beta2[:5] != 0)
    assert np.all(sim.beta[5:10] != 0) and np.all(sim.beta2[5:10] == 0)
    assert np.all(sim.beta2[10:15] != 0) and np.all(sim.beta[10:15] == 0)
