import numpy as np
import pytest

from medstate.core import Condition, EpochSet, Recording, make_epoch, slice_epochs
from medstate.csp import fit_csp
from medstate.errors import FormatError, LengthNotDivisible, SingleClass
from medstate.lda import fit_lda
from medstate.lstm import (LstmConfig, ScalarSequence, build_sequences, dump_lstm, fit_csp_lda_lstm, init_lstm,
                           load_lstm, loss_and_grads, predict_lstm, predict_proba, split_sub_epochs, train_lstm)
from medstate.synth import SynthParams, generate_subject
from medstate.core import SubjectData

from oracles import central_difference, max_relative_error

SMALL = LstmConfig(hidden=16, epochs=20, seed=3)


def _seqs(values, labels):
    return [ScalarSequence(np.asarray(v, dtype=float), int(l), "S") for v, l in zip(values, labels)]


def _separable(n=200, T=4):
    return _seqs([np.ones(T)] * n + [-np.ones(T)] * n, [1] * n + [0] * n)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    model = init_lstm(1, LstmConfig(hidden=2, seed=seed))
    model.b += rng.normal(0, 0.3, model.b.shape)
    model.b_out = 0.2
    X = rng.standard_normal((5, 3))
    y = rng.integers(0, 2, 5)
    _, grads = loss_and_grads(model, X, y)
    params = model.params()

    def f(p):
        model.set_params({k: v.copy() for k, v in p.items()})
        return loss_and_grads(model, X, y)[0]

    numeric = central_difference(f, {k: v.copy() for k, v in params.items()})
    assert max_relative_error(grads, numeric) <= 1e-4


def test_separable_sequences():
    seqs = _separable()
    model = train_lstm(seqs, LstmConfig())
    p = predict_proba(model, seqs)
    labels = np.array([s.label for s in seqs])
    assert np.mean((p > 0.5) == labels) >= 0.99
    assert p[labels == 1].mean() >= 0.9
    assert model.loss_history[1] < model.loss_history[0]
    assert model.hidden == 200 and len(model.loss_history) == 21


def test_no_signal_stays_near_chance():
    seqs = _seqs([np.zeros(4)] * 200, [0, 1] * 100)
    model = train_lstm(seqs, SMALL)
    acc = np.mean((predict_proba(model, seqs) > 0.5) == np.array([s.label for s in seqs]))
    assert 0.4 <= acc <= 0.6


def test_zero_weight_model_is_half(rng):
    model = init_lstm(1, SMALL)
    model.set_params({k: np.zeros_like(v) for k, v in model.params().items()})
    assert predict_lstm(model, _seqs([rng.standard_normal(4)], [0])[0]) == 0.5


def test_probabilities_bounded(rng):
    model = init_lstm(1, SMALL)
    vals = rng.normal(0, 50, (30, 4))
    p = predict_proba(model, _seqs(vals, [0] * 30))
    assert np.all((p > 0) & (p < 1))


def test_deterministic():
    a = train_lstm(_separable(40), SMALL)
    b = train_lstm(_separable(40), SMALL)
    for k in a.params():
        assert a.params()[k].tobytes() == b.params()[k].tobytes()


def test_single_class():
    with pytest.raises(SingleClass):
        train_lstm(_seqs([np.ones(4)] * 3, [1] * 3), SMALL)


def test_sub_epoch_split(rng):
    data = rng.standard_normal((3, 5, 256))
    parts = split_sub_epochs(data)
    assert parts.shape == (3, 4, 5, 64)
    assert np.allclose(parts[1, 2] + data[1, :, 128:192].mean(axis=1, keepdims=True), data[1, :, 128:192])
    with pytest.raises(LengthNotDivisible):
        split_sub_epochs(rng.standard_normal((1, 2, 200)))


def _epochs(rng, n=50, channels=20):
    eps = [make_epoch(rng.standard_normal((channels, 256)), i % 2, "S", i) for i in range(n)]
    return EpochSet.from_epochs(eps)


def test_build_sequences(rng):
    es = _epochs(rng)
    A = np.cov(rng.standard_normal((20, 100)))
    bank = fit_csp(A / np.trace(A), np.eye(20) / 20, 0.0, 10)
    lda = fit_lda(rng.standard_normal((40, 20)), np.repeat([0, 1], 20))
    seqs = build_sequences(es, bank, lda)
    assert len(seqs) == 50
    assert all(len(s.values) == 4 for s in seqs)
    assert [s.label for s in seqs] == list(es.labels)
    one = build_sequences(es.subset([0]), bank, lda)
    assert len(one) == 1 and len(one[0].values) == 4
    piece = rng.standard_normal((20, 64))
    same = EpochSet.from_epochs([make_epoch(np.tile(piece, 4), 1, "S", 0)])
    v = build_sequences(same, bank, lda)[0].values
    assert np.allclose(v, v[0])


def test_pipeline_on_planted_subject():
    params = SynthParams(n_subjects=2, minutes_per_condition=1.0)
    med, rest = generate_subject(params, 11, "S01")
    es = SubjectData("S01", (med, rest)).epochs(256)
    model = fit_csp_lda_lstm(es, cfg=LstmConfig(hidden=32, epochs=10, seed=0))
    assert model.bank.n_pairs == 10
    acc = np.mean((model.predict_proba(es) > 0.5) == es.labels)
    assert acc >= 0.9


def test_blob_round_trip():
    model = train_lstm(_separable(20), SMALL)
    blob = dump_lstm(model)
    assert blob[:4] == b"MLSM"
    back = load_lstm(blob)
    for k, v in model.params().items():
        assert np.array_equal(back.params()[k], np.asarray(v, dtype=np.float32).astype(float))
    assert back.input_shift == np.float32(model.input_shift)
    assert dump_lstm(back) == blob


def test_blob_rejects_garbage():
    blob = dump_lstm(init_lstm(1, SMALL))
    with pytest.raises(FormatError):
        load_lstm(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        load_lstm(blob[:-4])
