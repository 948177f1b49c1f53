import threading

import numpy as np
import pytest

from facefool.dataset import Dataset, LabeledImage
from facefool.errors import DatasetError, ModelError, OracleError
from facefool.image import GrayscaleImage
from facefool.oracle import (
    PIXEL_SCALE,
    ClassProbabilities,
    SoftmaxModel,
    TrainConfig,
    accuracy,
    load_model,
    save_model,
    train_softmax,
)
from facefool.rng import Pcg32


def zero_model(num_classes=3, width=4, height=4):
    return SoftmaxModel(
        np.zeros((num_classes, width * height)),
        np.zeros(num_classes),
        width,
        height,
        tuple(f"c{i}" for i in range(num_classes)),
    )


def random_image(seed, width=4, height=4):
    rng = Pcg32(seed)
    return GrayscaleImage(
        width, height, bytes(rng.randbelow(256) for _ in range(width * height))
    )


# -- ClassProbabilities ------------------------------------------------------

def test_probabilities_validation():
    ClassProbabilities((0.5, 0.5))
    with pytest.raises(ValueError):
        ClassProbabilities((0.5, 0.6))
    with pytest.raises(ValueError):
        ClassProbabilities((1.2, -0.2))
    with pytest.raises(ValueError):
        ClassProbabilities(())


def test_argmax_breaks_ties_low():
    assert ClassProbabilities((0.25, 0.25, 0.25, 0.25)).argmax() == 0
    assert ClassProbabilities((0.2, 0.4, 0.4)).argmax() == 1


# -- classify ----------------------------------------------------------------

def test_zero_model_is_uniform():
    model = zero_model(4)
    probs = model.classify(random_image(1))
    assert all(abs(v - 0.25) < 1e-12 for v in probs.values)


def test_classify_sums_to_one_and_is_pure():
    model = zero_model()
    img = random_image(2)
    a = model.classify(img)
    b = model.classify(img)
    assert a == b
    assert abs(sum(a.values) - 1.0) < 1e-6


def test_classify_counts_queries():
    model = zero_model()
    img = random_image(3)
    assert model.queries == 0
    model.classify(img)
    model.classify(img)
    assert model.queries == 2


def test_classify_rejects_wrong_dimensions():
    model = zero_model(3, 4, 4)
    with pytest.raises(OracleError, match="expects"):
        model.classify(random_image(1, 5, 4))
    assert model.queries == 0  # failed precondition is not a query


def test_query_counter_is_atomic():
    model = zero_model()
    img = random_image(4)

    def worker():
        for _ in range(50):
            model.classify(img)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert model.queries == 400


def test_logit_shift_invariance():
    rng = Pcg32(5)
    w = np.array([[rng.random() for _ in range(16)] for _ in range(3)])
    model = SoftmaxModel(w, np.zeros(3), 4, 4, ("a", "b", "c"))
    shifted = SoftmaxModel(w, np.full(3, 17.5), 4, 4, ("a", "b", "c"))
    img = random_image(6)
    p = model.classify(img)
    q = shifted.classify(img)
    assert all(abs(a - b) < 1e-9 for a, b in zip(p.values, q.values))


# -- training ----------------------------------------------------------------

def one_pixel_dataset():
    items = (
        LabeledImage(GrayscaleImage(1, 1, bytes([255])), 0, "white"),
        LabeledImage(GrayscaleImage(1, 1, bytes([51])), 1, "dark"),
    )
    return Dataset(items, 2, ("bright", "dim"))


def test_single_step_matches_hand_gradient():
    # Zero init makes p = (1/2, 1/2) for both samples; with x1 = 1.0 (y=0)
    # and x2 = 0.2 (y=1), dL/dW = [[-0.2], [0.2]] and dL/db = 0, so one
    # step of size eta lands at W = [[0.2 eta], [-0.2 eta]].
    eta = 0.3
    model = train_softmax(
        one_pixel_dataset(), TrainConfig(epochs=1, learning_rate=eta, l2_penalty=0.0)
    )
    assert model.weights[0, 0] == pytest.approx(0.2 * eta, abs=1e-12)
    assert model.weights[1, 0] == pytest.approx(-0.2 * eta, abs=1e-12)
    assert model.biases[0] == pytest.approx(0.0, abs=1e-12)
    assert model.biases[1] == pytest.approx(0.0, abs=1e-12)


def test_epochs_zero_rejected():
    with pytest.raises(ModelError):
        TrainConfig(epochs=0)


def test_training_deterministic(desk_split):
    train, _ = desk_split
    cfg = TrainConfig(epochs=20)
    a = train_softmax(train, cfg)
    b = train_softmax(train, cfg)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.biases, b.biases)


def test_empty_dataset_rejected():
    empty = Dataset((), 2, ("a", "b"))
    with pytest.raises(DatasetError):
        train_softmax(empty, TrainConfig(epochs=1))


def test_default_training_loss_monotone(desk_model):
    losses = desk_model.loss_history
    assert len(losses) == TrainConfig().epochs
    for i in range(len(losses) - 1):
        assert losses[i + 1] <= losses[i] + 1e-9, (
            f"loss rose at epoch {i}: {losses[i]} -> {losses[i + 1]}; "
            f"the default learning rate is too large"
        )


def test_desk_training_tolerates_aggressive_rate(desk_split):
    # the documented heavier configuration also trains fine
    train, _ = desk_split
    model = train_softmax(
        train, TrainConfig(epochs=500, learning_rate=0.5, l2_penalty=1e-4)
    )
    assert accuracy(model, train) >= 0.95


def test_desk_default_accuracy(desk_model, desk_split):
    train, test = desk_split
    assert accuracy(desk_model, train) >= 0.95
    assert accuracy(desk_model, test) >= 0.95


# -- loss_input_gradient ------------------------------------------------------

def test_zero_weight_gradient_is_zero():
    model = zero_model()
    grad = model.loss_input_gradient(random_image(7), 1)
    assert grad.shape == (4, 4)
    assert np.all(grad == 0.0)


def test_gradient_invalid_label():
    model = zero_model(3)
    with pytest.raises(OracleError):
        model.loss_input_gradient(random_image(8), 3)


def _loss_at(weights, biases, x, label):
    z = weights @ x + biases
    z = z - z.max()
    p = np.exp(z) / np.exp(z).sum()
    return -np.log(p[label])


def test_gradient_matches_finite_differences(desk_model, desk_split):
    _, test = desk_split
    item = test.items[0]
    grad = desk_model.loss_input_gradient(item.image, item.label)
    x = item.image.to_array().astype(float).ravel() / PIXEL_SCALE
    rng = Pcg32(99)
    h = 1e-3
    for _ in range(20):
        i = rng.randbelow(x.size)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (
            _loss_at(desk_model.weights, desk_model.biases, xp, item.label)
            - _loss_at(desk_model.weights, desk_model.biases, xm, item.label)
        ) / (2 * h)
        analytic = grad.ravel()[i]
        scale = max(abs(fd), abs(analytic), 1e-8)
        assert abs(fd - analytic) / scale < 1e-4


def test_gradient_tracks_weight_scaling(desk_model, desk_split):
    _, test = desk_split
    item = test.items[1]
    doubled = SoftmaxModel(
        2.0 * desk_model.weights,
        desk_model.biases,
        desk_model.input_width,
        desk_model.input_height,
        desk_model.class_names,
    )
    grad = doubled.loss_input_gradient(item.image, item.label)
    x = item.image.to_array().astype(float).ravel() / PIXEL_SCALE
    z = doubled.weights @ x + doubled.biases
    z = z - z.max()
    p = np.exp(z) / np.exp(z).sum()
    p[item.label] -= 1.0
    expected = (doubled.weights.T @ p).reshape(grad.shape)
    assert np.allclose(grad, expected, rtol=0, atol=1e-12)


# -- model file round trip -----------------------------------------------------

def test_model_save_load_round_trip(tmp_path, desk_model):
    path = tmp_path / "model.txt"
    save_model(desk_model, path)
    again = load_model(path)
    assert np.array_equal(again.weights, desk_model.weights)
    assert np.array_equal(again.biases, desk_model.biases)
    assert again.class_names == desk_model.class_names
    assert (again.input_width, again.input_height) == (
        desk_model.input_width, desk_model.input_height,
    )


def test_load_model_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a model\n")
    with pytest.raises(ModelError):
        load_model(path)
