import numpy as np
import pytest

from aenet.config import tiny_config
from aenet.data import generate_dataset
from aenet.diagnostics import model_gradcheck
from aenet.model import forward, init_params
from aenet.numerics import SplitMix64, Tensor
from aenet.objective import normalize_prototypes
from aenet.optim import SGD, Adam, global_grad_norm
from aenet.train import DivergenceError, compute_scores, evaluate_model, train


def test_adam_matches_hand_rolled_update():
    r = SplitMix64(1)
    w = Tensor(r.normal(4), requires_grad=True)
    grads = r.normal((10, 4))
    opt = Adam([w], lr=0.01)
    ref = w.data.copy()
    m = [0.0] * 4
    v = [0.0] * 4
    for t in range(1, 11):
        w.grad = grads[t - 1].copy()
        opt.step()
        for i in range(4):
            g = grads[t - 1][i]
            m[i] = 0.9 * m[i] + 0.1 * g
            v[i] = 0.999 * v[i] + 0.001 * g * g
            m_hat = m[i] / (1 - 0.9**t)
            v_hat = v[i] / (1 - 0.999**t)
            ref[i] -= 0.01 * m_hat / (v_hat**0.5 + 1e-8)
    np.testing.assert_allclose(w.data, ref, atol=1e-12)


def test_sgd_step_and_grad_norm():
    w = Tensor([1.0, 2.0], requires_grad=True)
    w.grad = np.array([3.0, 4.0])
    assert global_grad_norm([w]) == 5.0
    SGD([w], lr=0.5).step()
    assert w.data.tolist() == [-0.5, 0.0]


def test_zero_learning_rate_keeps_parameters_bit_identical(tiny_data):
    cfg = tiny_config(learning_rate=0.0, steps=5)
    params = init_params(cfg, SplitMix64(cfg.seed).substream("init"))
    before = params.snapshot()
    train(cfg, tiny_data, params)
    after = params.snapshot()
    assert all(before[k].tobytes() == after[k].tobytes() for k in before)


def test_loss_decreases_over_first_steps():
    cfg = tiny_config(steps=100, lambda_cons=0.0, lambda_deb=0.0, no_residual=True, learning_rate=1e-2)
    data = generate_dataset(cfg)
    _, log = train(cfg, data)
    losses = [s["loss"] for s in log.steps]
    assert np.mean(losses[-10:]) < np.mean(losses[:10])


def test_train_log_records_every_step_and_evaluations(tiny_data):
    cfg = tiny_config(steps=6, eval_every=3)
    _, log = train(cfg, tiny_data)
    assert [s["step"] for s in log.steps] == list(range(1, 7))
    assert set(log.steps[0]) == {"step", "loss", "cls", "cons", "deb", "grad_norm"}
    assert [e["step"] for e in log.evals] == [3, 6]


def test_training_is_reproducible(tiny_data):
    cfg = tiny_config(steps=10)
    p1, l1 = train(cfg, tiny_data)
    p2, l2 = train(cfg, tiny_data)
    assert l1.to_dict() == l2.to_dict()
    assert evaluate_model(p1, cfg, tiny_data).to_dict() == evaluate_model(p2, cfg, tiny_data).to_dict()


def test_training_never_reads_unseen_images(tiny_data, monkeypatch):
    seen_labels = set()
    original = type(tiny_data.training_view()).batch

    def spy(self, indices):
        x, y = original(self, indices)
        seen_labels.update(y.tolist())
        return x, y

    monkeypatch.setattr(type(tiny_data.training_view()), "batch", spy)
    train(tiny_config(steps=8), tiny_data)
    assert seen_labels and seen_labels <= set(tiny_data.seen_classes)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(tiny_data):
    cfg = tiny_config(steps=50, learning_rate=1e200, optimizer="sgd")
    with pytest.raises(DivergenceError):
        train(cfg, tiny_data)


def test_end_to_end_gradients_match_finite_differences():
    report = model_gradcheck(tiny_config())
    assert report.max_error < 1e-4, report.flagged
    assert "prompt" in report.errors and "vrru.w_z" in report.errors


def test_zero_init_residual_leaves_scores_unchanged(tiny_data):
    cfg = tiny_config()
    params = init_params(cfg, SplitMix64(cfg.seed).substream("init"))
    unit = normalize_prototypes(tiny_data.prototypes)
    x = Tensor(tiny_data.test_x)
    full = forward(params, cfg, x, unit)
    plain = forward(params, cfg.with_overrides(no_residual=True), x, unit)
    assert full.z is not None and plain.z is None
    assert np.abs(full.scores.data - plain.scores.data).max() <= 1e-12


def test_compute_scores_shape(tiny_data, tiny_cfg):
    params = init_params(tiny_cfg, SplitMix64(0))
    ps = compute_scores(params, tiny_cfg, tiny_data)
    assert ps.scores.shape == (len(tiny_data.test_y), tiny_cfg.num_classes)
