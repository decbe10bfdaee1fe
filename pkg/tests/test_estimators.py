import pickle

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qprecoding import (
    HalfAwarePrecoder,
    HeuristicPrecoder,
    InfiniteResolutionPrecoder,
    UnawarePrecoder,
    WMMSEPrecoder,
)
from qprecoding.estimators import SD_MAX_NODES, EpSolver, SdSolver, make_ils_solver
from qprecoding.wmmse import sinr, sum_rate

from conftest import crandn

ESTIMATORS = [
    WMMSEPrecoder(solver="sd", levels=4, noise_power=0.1, max_iter=5),
    WMMSEPrecoder(solver="ep", levels=4, noise_power=0.1, max_iter=5),
    UnawarePrecoder(levels=4, noise_power=0.1, max_iter=20),
    HalfAwarePrecoder(levels=4, noise_power=0.1, max_iter=5),
    HeuristicPrecoder(levels=4, noise_power=0.1, max_iter=20),
    InfiniteResolutionPrecoder(noise_power=0.1, max_iter=20),
]


@pytest.fixture
def H(rng):
    return crandn(rng, 2, 4)


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__ + "-" + e.solver)
def test_fit_transform_score(est, H, rng):
    est = clone(est).fit(H)
    assert est.precoder_.shape == (4, 2)
    assert est.n_ues_ == 2 and est.n_antennas_ == 4
    assert len(est.objective_trace_) == est.n_iter_ + 1
    if not isinstance(est, InfiniteResolutionPrecoder):
        assert np.all(est.quantizer_.contains(est.precoder_))
    X = est.transform(crandn(rng, 2, 10))
    assert X.shape == (4, 10)
    # the transmitted precoder uses the full power budget
    assert np.sum(np.abs(est.scaling_ * est.precoder_) ** 2) == pytest.approx(est.power)
    rates = est.predict(H)
    assert est.score(H) == pytest.approx(rates.sum())
    assert est.score(H) == pytest.approx(sum_rate(H, est.precoder_, 1.0, 0.1))


def test_get_params_and_clone():
    est = WMMSEPrecoder(solver="ep", levels=16, ep_damping=0.3)
    params = est.get_params()
    assert params["solver"] == "ep" and params["levels"] == 16 and params["ep_damping"] == 0.3
    twin = clone(est)
    assert twin.get_params() == params and twin is not est


def test_unfitted_raises(H):
    with pytest.raises(NotFittedError):
        WMMSEPrecoder().score(H)


def test_predict_matches_sinr(H):
    est = UnawarePrecoder(levels=8, noise_power=0.2).fit(H)
    expected = np.log2(1 + sinr(H, est.scaling_ * est.precoder_, 0.2))
    np.testing.assert_allclose(est.predict(H), expected)


def test_weighted_score(H):
    est = InfiniteResolutionPrecoder(noise_power=0.1, weights=[2.0, 0.5]).fit(H)
    assert est.score(H) == pytest.approx(np.array([2.0, 0.5]) @ est.predict(H))


def test_explicit_step(H):
    est = WMMSEPrecoder(levels=2, step=0.3, noise_power=0.1, max_iter=3).fit(H)
    assert set(np.abs(est.precoder_.real.ravel())) == {0.15}


def test_pickle_round_trip(H):
    est = WMMSEPrecoder(solver="ep", levels=4, noise_power=0.1, max_iter=3).fit(H)
    again = pickle.loads(pickle.dumps(est))
    np.testing.assert_array_equal(again.precoder_, est.precoder_)
    assert isinstance(make_ils_solver("ep"), EpSolver)


@pytest.mark.parametrize(
    "params",
    [
        dict(solver="zf"),
        dict(levels=1),
        dict(levels=2.5),
        dict(power=0.0),
        dict(noise_power=-1.0),
        dict(step=0.0),
        dict(weights=[1.0, 2.0, 3.0]),
        dict(weights=[-1.0, 1.0]),
        dict(ep_damping=2.0),
        dict(sd_max_nodes=0),
    ],
)
def test_invalid_parameters(params, H):
    with pytest.raises(ValueError):
        WMMSEPrecoder(max_iter=2, **params).fit(H)


@pytest.mark.parametrize(
    "bad",
    [np.ones((3, 2)), np.full((2, 3), np.nan), np.ones((2, 2, 2)), np.ones((0, 3))],
)
def test_invalid_channels(bad):
    with pytest.raises(ValueError):
        InfiniteResolutionPrecoder().fit(bad)


def test_vector_channel_is_single_ue():
    est = InfiniteResolutionPrecoder(noise_power=0.1).fit(np.ones(3))
    assert est.precoder_.shape == (3, 1)


def test_symbol_shape_checked(H):
    est = UnawarePrecoder().fit(H)
    assert est.transform(np.ones(2)).shape == (4, 1)
    with pytest.raises(ValueError):
        est.transform(np.ones((3, 5)))


def test_zero_channel_scores_zero():
    est = InfiniteResolutionPrecoder().fit(np.zeros((2, 3)))
    assert est.score(np.ones((2, 3))) == 0.0
    np.testing.assert_array_equal(est.predict(np.ones((2, 3))), 0.0)


def test_sd_solver_counts_truncations(rng):
    est = WMMSEPrecoder(solver="sd", levels=8, noise_power=1e-3, max_iter=3, sd_max_nodes=1)
    est.fit(crandn(rng, 2, 8))
    assert est.sd_truncated_ > 0
    exact = WMMSEPrecoder(solver="sd", levels=4, noise_power=0.1, max_iter=3, sd_max_nodes=None)
    assert exact.fit(crandn(rng, 2, 4)).sd_truncated_ == 0


def test_sd_solver_reset():
    solver = make_ils_solver("sd", sd_max_nodes=5)
    assert isinstance(solver, SdSolver) and solver.max_nodes == 5
    assert make_ils_solver("sd").max_nodes == SD_MAX_NODES
    solver.calls, solver.truncated = 3, 2
    solver.reset()
    assert solver.calls == 0 and solver.truncated == 0
