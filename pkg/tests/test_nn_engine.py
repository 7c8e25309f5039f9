import math

import numpy as np
import pytest

from compbias.common.errors import NonFiniteLoss, ShapeMismatch
from compbias.datagen import Encoding, build_dataset
from compbias.mapping_core import AttributeSpace, Mapping, enumerate_mappings
from compbias.nn_engine import (
    ADAM_EPS,
    Activation,
    LossKind,
    OptimizerKind,
    apply_update,
    backward,
    evaluate_loss,
    fit,
    forward,
    gradient_check,
    init,
    loss,
    loss_and_gradients,
    make_optimizer,
    step,
    true_label_log_probs,
)

TOY = AttributeSpace.toy256()


def dataset(table=(0, 1, 3, 2), encoding=Encoding.OHT2, seed=0):
    return build_dataset(Mapping(table=table, space=TOY), encoding, seed, image_size=16)


def zero_net(input_dim=16):
    net = init(0, input_dim)
    for theta in net.params.values():
        theta[...] = 0.0
    return net


def test_init_is_deterministic():
    assert init(0, 16).checksum() == init(0, 16).checksum()
    assert init(0, 16).checksum() != init(1, 16).checksum()


def test_init_bounds():
    net = init(0, 16)
    assert net.input_dim == 16
    for layer in range(net.num_hidden):
        fan_in = 16 if layer == 0 else 128
        for name in net.hidden_names(layer):
            assert np.all(np.abs(net.params[name]) <= math.sqrt(1.0 / fan_in))
    for head in range(net.num_heads):
        for name in net.head_names(head):
            assert np.all(np.abs(net.params[name]) <= math.sqrt(1.0 / 128))


def test_init_shapes():
    net = init(0, 16, num_heads=2, num_classes=2)
    assert net.params["W0"].shape == (16, 128)
    assert net.params["W2"].shape == (128, 128)
    assert net.params["head1.W"].shape == (128, 2)
    with pytest.raises(ShapeMismatch):
        init(0, 0)


def test_zero_network_is_uniform():
    probs = forward(zero_net(), np.ones((4, 16)))
    assert probs.shape == (4, 2, 2)
    assert np.all(probs == 0.5)


def test_softmax_shift_invariance():
    data = dataset()
    net = init(3, 16)
    before = forward(net, data.inputs)
    net.params["head0.b"] += 7.5
    after = forward(net, data.inputs)
    np.testing.assert_allclose(after, before, rtol=0, atol=1e-12)


def test_predictions_are_normalized():
    data = dataset()
    probs = forward(init(0, 16), data.inputs)
    assert probs.shape == (4, 2, 2)
    assert np.all(np.abs(probs.sum(axis=2) - 1.0) < 1e-9)


def test_forward_rejects_wrong_width():
    with pytest.raises(ShapeMismatch):
        forward(init(0, 16), np.zeros((4, 15)))


def test_loss_examples():
    uniform = np.full((1, 2, 2), 0.5)
    labels = np.zeros((1, 2), dtype=int)
    assert loss(uniform, labels, LossKind.CE) == pytest.approx(math.log(2))

    perfect = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    assert loss(perfect, np.array([[0, 1]]), LossKind.L2) == 0.0

    skewed = np.array([[[0.8, 0.2], [0.8, 0.2]]])
    assert loss(skewed, labels, LossKind.L2) == pytest.approx(0.08)

    with pytest.raises(ShapeMismatch):
        loss(uniform, np.zeros((2, 2), dtype=int), LossKind.CE)


@pytest.mark.parametrize("kind", [LossKind.CE, LossKind.L2])
@pytest.mark.parametrize("encoding", [Encoding.OHT2, Encoding.IMAGE])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(kind, encoding, seed):
    data = dataset(table=(2, 0, 3, 1), encoding=encoding, seed=seed)
    net = init(seed, data.inputs.shape[1])
    errors = gradient_check(net, data.inputs, data.labels, kind, samples=16, seed=seed)
    assert set(errors) == set(net.params)
    assert max(errors.values()) < 1e-5


def test_gradient_check_on_tanh_network():
    data = dataset()
    net = init(4, 16, activation=Activation.TANH)
    errors = gradient_check(net, data.inputs, data.labels, LossKind.CE, samples=8)
    assert max(errors.values()) < 1e-5


def test_zero_l2_loss_has_zero_gradients():
    net = zero_net()
    for head in range(2):
        net.params[f"head{head}.b"][:] = [1000.0, -1000.0]
    inputs = np.ones((4, 16))
    labels = np.zeros((4, 2), dtype=int)
    assert evaluate_loss(net, inputs, labels, LossKind.L2) == 0.0
    grads = backward(net, inputs, labels, LossKind.L2)
    assert all(np.all(g == 0.0) for g in grads.values())


def test_gradient_scale_is_linear():
    data = dataset()
    net = init(0, 16)
    single = backward(net, data.inputs, data.labels, LossKind.CE)
    double = backward(net, data.inputs, data.labels, LossKind.CE, scale=2.0)
    for name in single:
        np.testing.assert_allclose(double[name], 2.0 * single[name], rtol=1e-12, atol=0)


def test_sgd_step():
    params = {"w": np.array([1.0])}
    state = make_optimizer(OptimizerKind.SGD, params, learning_rate=0.1, weight_decay=0.0)
    apply_update(params, {"w": np.array([1.0])}, state)
    assert abs(params["w"][0] - 0.9) < 1e-10


def test_sgd_weight_decay_shrinks():
    params = {"w": np.array([2.0])}
    state = make_optimizer(OptimizerKind.SGD, params, learning_rate=0.1, weight_decay=0.5)
    apply_update(params, {"w": np.array([0.0])}, state)
    assert abs(params["w"][0] - 2.0 * (1 - 0.1 * 0.5)) < 1e-10


def test_adam_first_step():
    params = {"w": np.array([1.0])}
    state = make_optimizer(OptimizerKind.ADAM, params, learning_rate=0.01, weight_decay=0.0)
    apply_update(params, {"w": np.array([-0.3])}, state)
    # m_hat = g and v_hat = g^2 after bias correction
    expected = 1.0 - 0.01 * (-0.3) / (0.3 + ADAM_EPS)
    assert abs(params["w"][0] - expected) < 1e-10
    assert state.step_count == 1


def test_adam_weight_decay_enters_moments():
    params = {"w": np.array([1.0])}
    state = make_optimizer(OptimizerKind.ADAM, params, learning_rate=0.01, weight_decay=0.1)
    apply_update(params, {"w": np.array([0.0])}, state)
    # effective gradient is wd * theta = 0.1
    assert abs(params["w"][0] - (1.0 - 0.01 * 0.1 / (0.1 + ADAM_EPS))) < 1e-10


def test_update_rejects_unknown_gradients():
    params = {"w": np.array([1.0])}
    state = make_optimizer(OptimizerKind.SGD, params)
    with pytest.raises(ShapeMismatch):
        apply_update(params, {"v": np.array([1.0])}, state)
    with pytest.raises(ShapeMismatch):
        apply_update(params, {"w": np.array([1.0, 2.0])}, state)


def test_small_sgd_step_decreases_ce_on_every_dataset():
    net0 = init(0, 16)
    for mapping in enumerate_mappings(TOY):
        data = build_dataset(mapping, Encoding.OHT2, 0)
        net = net0.copy()
        before, grads = loss_and_gradients(net, data.inputs, data.labels, LossKind.CE)
        step(net, grads, make_optimizer(OptimizerKind.SGD, net.params, learning_rate=1e-4, weight_decay=0.0))
        assert evaluate_loss(net, data.inputs, data.labels, LossKind.CE) < before


def test_fit_records_loss_before_each_update():
    data = dataset()
    net = init(0, 16)
    start = evaluate_loss(net, data.inputs, data.labels, LossKind.CE)
    state = make_optimizer(OptimizerKind.ADAM, net.params, learning_rate=1e-3)
    losses = fit(net, data.inputs, data.labels, LossKind.CE, state, epochs=50)
    assert len(losses) == 50
    assert losses[0] == start
    assert losses[-1] < losses[0]


def test_fit_is_deterministic():
    data = dataset()
    runs = []
    for _ in range(2):
        net = init(5, 16)
        state = make_optimizer(OptimizerKind.SGD, net.params, learning_rate=1e-2)
        runs.append((fit(net, data.inputs, data.labels, LossKind.L2, state, epochs=20), net.checksum()))
    assert runs[0] == runs[1]


def test_fit_raises_on_non_finite_loss():
    data = dataset()
    inputs = np.array(data.inputs)
    inputs[0, 0] = np.inf
    net = init(0, 16)
    state = make_optimizer(OptimizerKind.SGD, net.params)
    with pytest.raises(NonFiniteLoss) as info:
        fit(net, inputs, data.labels, LossKind.CE, state, epochs=5)
    assert info.value.losses == []


def test_true_label_log_probs():
    data = dataset()
    net = init(0, 16)
    logp = true_label_log_probs(net, data.inputs, data.labels)
    assert logp.shape == (4, 2)
    assert np.all(logp < 0.0)
    assert -logp.mean() == pytest.approx(evaluate_loss(net, data.inputs, data.labels, LossKind.CE))
