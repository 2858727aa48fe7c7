import numpy as np
import pytest

from medstate.core import CohortDataset, Condition, EpochSet, Recording, SubjectData, make_epoch
from medstate.cv import (CvMode, CvReport, LeakageError, SweepTable, _check_leakage, carve_validation, grid_sweep,
                         parse_report_csv, parse_sweep_csv, plan_intra, plan_loso, run_experiment)
from medstate.errors import TooFewEpochs, TooFewSubjects
from medstate.synth import SynthParams, generate_cohort


def _epochset(n1, n0, subject="S"):
    labels = [1] * n1 + [0] * n0
    return EpochSet.from_epochs([make_epoch(np.zeros((2, 8)), l, subject, i) for i, l in enumerate(labels)])


def _tiny_cohort(n_subjects, seconds=2):
    rng = np.random.default_rng(0)
    subs = []
    for i in range(n_subjects):
        sid = f"S{i:02d}"
        subs.append(SubjectData(sid, tuple(Recording(sid, c, 128.0, rng.standard_normal((2, 128 * seconds)))
                                           for c in (Condition.MEDITATION, Condition.REST))))
    return CohortDataset(tuple(subs))


@pytest.fixture(scope="module")
def small_cohort():
    return generate_cohort(SynthParams(n_subjects=3, minutes_per_condition=1.0, seed=4))


def test_intra_plan_balanced():
    plan = plan_intra(_epochset(50, 50), seed=1)
    labels = _epochset(50, 50).labels
    for f in range(10):
        test = plan.test_indices(f)
        assert len(test) == 10
        assert np.sum(labels[test] == 1) == 5
    assert sorted(np.concatenate([plan.test_indices(f) for f in range(10)])) == list(range(100))


def test_intra_plan_stratification_uneven():
    es = _epochset(37, 33)
    plan = plan_intra(es, seed=2)
    labels = es.labels
    for f in range(10):
        test = plan.test_indices(f)
        assert abs(np.sum(labels[test] == 1) - len(test) * 37 / 70) <= 1
        assert len(set(plan.train_indices(f)) & set(test)) == 0


def test_intra_plan_deterministic():
    es = _epochset(30, 30)
    assert plan_intra(es, 5).fold_assignments == plan_intra(es, 5).fold_assignments
    assert plan_intra(es, 5).fold_assignments != plan_intra(es, 6).fold_assignments


def test_intra_plan_needs_ten_per_class():
    with pytest.raises(TooFewEpochs):
        plan_intra(_epochset(9, 30))


@pytest.mark.parametrize("n", [2, 54])
def test_loso_plan(n):
    plan = plan_loso(_tiny_cohort(n))
    assert plan.n_folds == n and plan.mode is CvMode.LOSO
    assert sorted(plan.fold_assignments.values()) == list(range(n))


def test_loso_needs_two():
    with pytest.raises(TooFewSubjects):
        plan_loso(_tiny_cohort(1))


def test_carve_validation():
    es = _epochset(100, 100)
    train, val = carve_validation(es, 0.1, seed=3)
    assert len(val) == 20 and len(train) == 180
    assert not set(train.uids) & set(val.uids)
    assert np.sum(val.labels == 1) == 10
    with pytest.raises(TooFewEpochs):
        carve_validation(_epochset(5, 50))


def test_leakage_check():
    es = _epochset(20, 20)
    _check_leakage(es.subset(range(10)).uids, es.subset(range(10, 20)), "ok")
    with pytest.raises(LeakageError):
        _check_leakage(es.uids, es.subset([3]), "bad")


def test_run_experiment_report(small_cohort):
    rep = run_experiment(small_cohort, "CspLda", {"alpha": 0.0, "n_pairs": 3}, mode="intra")
    assert len(rep.per_fold_accuracy) == 30
    assert rep.fold_subjects == [s for s in small_cohort.subject_ids for _ in range(10)]
    assert rep.mean == pytest.approx(sum(rep.per_fold_accuracy) / 30)
    assert rep.sd == pytest.approx(np.std(rep.per_fold_accuracy, ddof=0))
    assert all(0 <= a <= 100 for a in rep.per_fold_accuracy)
    assert rep.audit["leakage_ok"]
    assert rep.mean >= 90


def test_reproducible(small_cohort):
    a = run_experiment(small_cohort, "CspLda", mode="inter", plan_seed=1)
    b = run_experiment(small_cohort, "CspLda", mode="inter", plan_seed=1)
    assert a.to_json() == b.to_json()
    assert len(a.per_fold_accuracy) == 3


def test_k_frozen_after_first_round(small_cohort):
    rep = run_experiment(small_cohort, "SvdNn", mode="inter", k_grid=(4, 8), refine=0)
    sel = rep.audit["k_selection"]
    assert sel["frozen"] and sel["fold"] == 0 and sel["subject_id"] == "S01"
    assert {f["k"] for f in rep.audit["folds"]} == {sel["k"]} == {rep.hyperparams["k"]}
    assert set(sel["scores"]) == {"4", "8"}
    assert [f.get("k_selected_here", False) for f in rep.audit["folds"]] == [True, False, False]


def test_report_round_trips(small_cohort):
    rep = run_experiment(small_cohort, "CspLda", mode="inter")
    back = CvReport.from_dict(rep.to_dict())
    assert back.per_fold_accuracy == rep.per_fold_accuracy and back.to_json() == rep.to_json()
    parsed = parse_report_csv(rep.to_csv())
    assert [a for _, _, a in parsed["folds"]] == rep.per_fold_accuracy
    assert parsed["mean"] == rep.mean and parsed["sd"] == rep.sd


def test_sweep_cells(small_cohort):
    table = grid_sweep(small_cohort, alphas=[0.0, 1e-1], pair_counts=[2, 3], mode="inter")
    assert len(table.cells) == 4
    header = table.to_csv().splitlines()[0].split(",")
    assert header == ["n_pairs", "0.1", "classical"]
    parsed = parse_sweep_csv(table.to_csv())
    for key, rep in table.cells.items():
        assert parsed[key] == (rep.mean, rep.sd)


def test_sweep_matches_single_runs(small_cohort):
    table = grid_sweep(small_cohort, alphas=[0.0, 1e-3], pair_counts=[2, 4], mode="intra", plan_seed=2)
    for (a, n), cell in table.cells.items():
        rep = run_experiment(small_cohort, "CspLda", {"alpha": a, "n_pairs": n}, mode="intra", plan_seed=2)
        assert cell.per_fold_accuracy == pytest.approx(rep.per_fold_accuracy)


def test_sweep_default_shape(small_cohort):
    table = grid_sweep(small_cohort, mode="inter")
    lines = table.to_csv().strip().splitlines()
    assert len(lines) == 1 + 9
    assert all(len(l.split(",")) == 1 + 11 for l in lines)
    assert lines[0].split(",")[-1] == "classical"
    assert [l.split(",")[0] for l in lines[1:]] == [str(n) for n in range(2, 11)]


def test_sweep_single_cell(small_cohort):
    table = grid_sweep(small_cohort, alphas=[1e-2], pair_counts=[3], mode="inter")
    lines = table.to_csv().strip().splitlines()
    assert len(lines) == 2 and len(lines[1].split(",")) == 2


def test_sweep_rejects_empty(small_cohort):
    with pytest.raises(ValueError):
        grid_sweep(small_cohort, alphas=[], pair_counts=[2])


def test_mode_parse():
    assert CvMode.parse("intra") is CvMode.INTRA
    assert CvMode.parse("LeaveOneSubjectOut") is CvMode.LOSO
    with pytest.raises(ValueError):
        CvMode.parse("sideways")
