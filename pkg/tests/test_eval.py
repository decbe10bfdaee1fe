import numpy as np
import pytest

from qprecoding.channel import CsiModel
from qprecoding.eval import (
    ExperimentConfig,
    ResultRow,
    draw_weights,
    fronthaul_capacity,
    make_estimator,
    run_experiment,
    run_trial,
)


def _small(**kw):
    base = dict(schemes=["unaware"], snr_grid_db=[10.0], M=4, K=2, L=4, trials=2, continuous_max_iterations=20)
    base.update(kw)
    return ExperimentConfig(**base)


def test_fronthaul_reference_example():
    assert fronthaul_capacity(16, 4, 100, 4, 3, 3) == (1984, 19200)


def test_fronthaul_no_data_symbols():
    assert fronthaul_capacity(16, 4, 0, 4, 3, 3) == (2 * 16 * 4 * 3, 0)


@pytest.mark.parametrize("args", [(16, 4, -1, 4, 3, 3), (16.5, 4, 1, 4, 3, 3)])
def test_fronthaul_rejects_bad_input(args):
    with pytest.raises(ValueError):
        fronthaul_capacity(*args)


def test_single_trial_is_deterministic():
    a = run_experiment(_small(trials=1))
    b = run_experiment(_small(trials=1))
    assert a[0].mean_sum_rate == b[0].mean_sum_rate
    assert np.isfinite(a[0].mean_sum_rate) and a[0].std_error == 0.0


def test_trial_channel_independent_of_trial_count():
    _, rec2 = run_experiment(_small(trials=2), return_records=True)
    _, rec4 = run_experiment(_small(trials=4), return_records=True)
    assert [r.sum_rate for r in rec4[:2]] == [r.sum_rate for r in rec2]


def test_scheme_list_does_not_change_other_schemes():
    _, only = run_experiment(_small(), return_records=True)
    _, both = run_experiment(_small(schemes=["infinite_res", "unaware"]), return_records=True)
    assert [r.sum_rate for r in only] == [r.sum_rate for r in both if r.scheme == "unaware"]


def test_seed_changes_results():
    a = run_experiment(_small(seed=0))[0].mean_sum_rate
    b = run_experiment(_small(seed=1))[0].mean_sum_rate
    assert a != b


def test_rows_layout_and_statistics():
    cfg = _small(schemes=["infinite_res", "unaware"], snr_grid_db=[0.0, 10.0], trials=3)
    rows, records = run_experiment(cfg, return_records=True)
    assert [(r.scheme, r.snr_db) for r in rows] == [
        ("infinite_res", 0.0), ("infinite_res", 10.0), ("unaware", 0.0), ("unaware", 10.0)
    ]
    cell = np.array([r.sum_rate for r in records if r.scheme == "unaware" and r.snr_db == 10.0])
    row = rows[3]
    assert row.mean_sum_rate == pytest.approx(cell.mean())
    assert row.std_error == pytest.approx(cell.std(ddof=1) / np.sqrt(3))
    assert row.trials == 3 and row.failures == 0 and not row.flagged


def test_parallel_matches_serial():
    serial = run_experiment(_small(trials=3))
    parallel = run_experiment(_small(trials=3, n_jobs=2))
    assert [r.mean_sum_rate for r in serial] == [r.mean_sum_rate for r in parallel]


def test_traces_only_for_requested_trial():
    _, records = run_experiment(_small(trials=2), return_records=True, trace_trial=1)
    assert records[0].objective_trace is None
    assert len(records[1].objective_trace) == records[1].iterations + 1


def test_imperfect_csi_runs():
    cfg = _small(csi=CsiModel(mode="ls_plus_aqnm", csi_bits=3))
    assert np.isfinite(run_experiment(cfg)[0].mean_sum_rate)


def test_draw_weights_normalized():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = draw_weights(rng, 5)
        assert w.sum() == pytest.approx(5)
        assert set(np.round(w / w.min(), 12)) <= {1.0, 2.0}


def test_weighted_records_use_true_weights():
    cfg = _small(weights=[0.5, 1.5], trials=1)
    rec = run_trial(cfg.validate(), 0)[0]
    assert np.isfinite(rec.sum_rate)


def test_flagged_rows():
    assert ResultRow("sd", 0.0, 1.0, 0.0, 98, 1.0, 3.0, failures=2).flagged
    assert not ResultRow("sd", 0.0, 1.0, 0.0, 100, 1.0, 3.0, failures=1).flagged


def test_failures_are_recorded(monkeypatch):
    from qprecoding import eval as ev

    def boom(self, H, y=None):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(ev.UnawarePrecoder, "fit", boom)
    rows = run_experiment(_small())
    assert rows[0].failures == 2 and rows[0].trials == 0 and rows[0].flagged
    assert np.isnan(rows[0].mean_sum_rate)


def test_make_estimator_iteration_caps():
    cfg = _small(max_iterations=7, continuous_max_iterations=11).validate()
    assert make_estimator("sd", cfg, 0.1, None).max_iter == 7
    assert make_estimator("half_aware", cfg, 0.1, None).max_iter == 7
    assert make_estimator("unaware", cfg, 0.1, None).max_iter == 11
    with pytest.raises(ValueError):
        make_estimator("nope", cfg, 0.1, None)


@pytest.mark.parametrize(
    "kw",
    [
        dict(schemes=[]),
        dict(schemes=["zf"]),
        dict(snr_grid_db=[]),
        dict(trials=0),
        dict(L=1),
        dict(power=0.0),
        dict(design_weights="x"),
        dict(weights="fancy"),
        dict(weights=[1.0]),
        dict(M=1, K=2),
        dict(sd_max_nodes=-1),
        dict(sd_max_nodes=2.5),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _small(**kw).validate()


def test_sd_budget_reaches_estimator_and_rows():
    cfg = _small(schemes=["sd"], sd_max_nodes=1, snr_grid_db=[30.0], max_iterations=3).validate()
    assert make_estimator("sd", cfg, 0.1, None).sd_max_nodes == 1
    assert make_estimator("sd", _small(sd_max_nodes=0).validate(), 0.1, None).sd_max_nodes is None
    (row,) = run_experiment(cfg)
    assert row.truncated_solves > 0 and "truncated_solves" in row.as_dict()
