import numpy as np
import pytest

from aenet.config import default_gamma_grid
from aenet.evaluation import (
    PredictionScores,
    best_gamma,
    evaluate_scores,
    gzsl_metrics,
    harmonic_mean,
    infer_gzsl,
    infer_zsl,
    load_scores,
    per_class_accuracy,
    save_scores,
    sweep_gamma,
    write_csv,
    write_json,
)
from aenet.numerics import SplitMix64


def random_scores(seed, n=40, c=6, n_seen=4):
    r = SplitMix64(seed)
    mask = np.zeros(c, dtype=bool)
    mask[r.permutation(c)[:n_seen]] = True
    labels = np.arange(n) % c
    return PredictionScores(r.uniform((n, c), -1, 1), mask, labels)


def test_infer_zsl_restricted_to_unseen():
    ps = PredictionScores([[0.9, 0.1, 0.4], [0.9, 0.5, 0.2]], [True, False, False], [1, 2])
    assert infer_zsl(ps).tolist() == [2, 1]


def test_infer_zsl_tie_goes_to_lowest_index():
    ps = PredictionScores([[0.0, 0.3, 0.3]], [True, False, False], [1])
    assert infer_zsl(ps).tolist() == [1]


def test_infer_gzsl_hand_cases():
    ps = PredictionScores([[0.6, 0.5], [0.2, 0.7]], [True, False], [0, 1])
    assert infer_gzsl(ps, 0.0).tolist() == [0, 1]
    assert infer_gzsl(ps, 0.2).tolist() == [1, 1]


def test_large_gamma_sends_everything_to_unseen():
    ps = random_scores(1)
    pred = infer_gzsl(ps, 3.0)
    assert set(pred.tolist()) <= set(ps.unseen_classes.tolist())
    S, U, H = gzsl_metrics(ps, 3.0)
    assert S == 0.0 and H == 0.0


def test_per_class_accuracy_hand_example():
    pred = [0, 0, 1, 1, 2, 0]
    truth = [0, 0, 0, 1, 2, 2]
    np.testing.assert_allclose(per_class_accuracy(pred, truth, [0, 1, 2]), [2 / 3, 1.0, 0.5])


def test_per_class_accuracy_weights_classes_equally():
    truth = [0] * 9 + [1]
    pred = [0] * 9 + [0]
    acc = per_class_accuracy(pred, truth, [0, 1])
    assert acc.mean() == 0.5
    assert np.mean(np.array(pred) == np.array(truth)) == 0.9


def test_per_class_accuracy_errors():
    with pytest.raises(ValueError):
        per_class_accuracy([0], [0], [])
    with pytest.raises(ValueError):
        per_class_accuracy([0], [0], [0, 1])


@pytest.mark.parametrize(
    "S, U, H",
    [(76.4, 73.1, 74.7), (45.2, 58.6, 51.0), (0.0, 0.0, 0.0), (0.0, 0.7, 0.0), (0.5, 0.5, 0.5)],
)
def test_harmonic_mean_examples(S, U, H):
    assert harmonic_mean(S, U) == pytest.approx(H, abs=0.05)


def test_harmonic_mean_bounds():
    r = SplitMix64(2)
    for S, U in r.uniform((200, 2)):
        h = harmonic_mean(S, U)
        assert min(S, U) - 1e-15 <= h <= max(S, U) + 1e-15


def nested_check(ps, grid):
    """Return True iff unseen-predicted sets grow and S/U move monotonically."""
    previous = None
    prev_s, prev_u = None, None
    for gamma in grid:
        pred = infer_gzsl(ps, gamma)
        to_unseen = set(np.flatnonzero(~ps.seen_mask[pred]).tolist())
        S, U, _ = gzsl_metrics(ps, gamma)
        if previous is not None and not (previous <= to_unseen and S <= prev_s and U >= prev_u):
            return False
        previous, prev_s, prev_u = to_unseen, S, U
    return True


def test_unseen_predictions_nested_along_gamma():
    grid = default_gamma_grid()
    for seed in range(20):
        assert nested_check(random_scores(100 + seed), grid)


def test_nested_check_detects_violation():
    ps = random_scores(3)
    assert not nested_check(ps, [1.0, 0.0])


def test_sweep_and_best_gamma():
    ps = random_scores(4)
    grid = default_gamma_grid()
    rows = sweep_gamma(ps, grid)
    assert [r["gamma"] for r in rows] == list(grid)
    best = best_gamma(rows)
    assert best["H"] == max(r["H"] for r in rows)
    first = next(r for r in rows if r["H"] == best["H"])
    assert best is first
    with pytest.raises(ValueError):
        sweep_gamma(ps, [])


def test_metrics_invariant_to_sample_order_and_monotone_transform():
    ps = random_scores(5)
    perm = SplitMix64(6).permutation(len(ps.labels))
    shuffled = PredictionScores(ps.scores[perm], ps.seen_mask, ps.labels[perm])
    squashed = PredictionScores(np.tanh(ps.scores), ps.seen_mask, ps.labels)
    a = evaluate_scores(ps, [0.0])
    b = evaluate_scores(shuffled, [0.0])
    c = evaluate_scores(squashed, [0.0])
    assert (a.acc_zsl, a.S, a.U, a.H) == (b.acc_zsl, b.S, b.U, b.H) == (c.acc_zsl, c.S, c.U, c.H)


def test_zsl_accuracy_perfect_scores():
    labels = np.arange(12) % 4
    scores = np.eye(4)[labels]
    ps = PredictionScores(scores, [True, True, False, False], labels)
    report = evaluate_scores(ps, [0.0, 0.5])
    assert report.acc_zsl == 1.0
    assert report.H == 1.0
    assert report.gamma == 0.0


def test_prediction_scores_validation():
    with pytest.raises(ValueError):
        PredictionScores(np.zeros((2, 3)), [True, False], [0, 1])
    with pytest.raises(ValueError):
        PredictionScores(np.zeros((2, 3)), [True, False, False], [0, 3])
    with pytest.raises(ValueError):
        PredictionScores(np.full((1, 2), np.nan), [True, False], [0])


def test_scores_round_trip(tmp_path):
    ps = random_scores(7)
    save_scores(tmp_path / "scores", ps)
    back = load_scores(tmp_path / "scores")
    np.testing.assert_array_equal(back.scores, ps.scores.astype(np.float32))
    np.testing.assert_array_equal(back.seen_mask, ps.seen_mask)
    np.testing.assert_array_equal(back.labels, ps.labels)
    assert back.class_names[0] == "class000"


def test_json_and_csv_writers(tmp_path):
    write_json(tmp_path / "a.json", {"b": 1, "a": [0.5]})
    assert (tmp_path / "a.json").read_text() == '{\n  "a": [\n    0.5\n  ],\n  "b": 1\n}\n'
    write_csv(tmp_path / "a.csv", [{"x": 1, "y": 0.25, "z": "skip"}], ["x", "y"])
    assert (tmp_path / "a.csv").read_text() == "x,y\n1,0.25\n"
