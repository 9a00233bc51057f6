from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from src.errors import ConfigError, DomainError
from src.orchestration.config import DataConfig
from src.sources.csv_reader import read_csv_split, read_labeled_csv
from src.sources.repository import make_dataset
from src.sources.synthetic import generate_split, n_classes_of


def _perceptron_separates(x: np.ndarray, y: np.ndarray, k: int, epochs: int = 200) -> bool:
    xb = np.column_stack([x, np.ones(len(x))])
    w = np.zeros((xb.shape[1], k))
    for _ in range(epochs):
        mistakes = 0
        for xi, yi in zip(xb, y):
            guess = int(np.argmax(xi @ w))
            if guess != yi:
                w[:, yi] += xi
                w[:, guess] -= xi
                mistakes += 1
        if mistakes == 0:
            return True
    return False


@pytest.mark.parametrize("name", ["blobs", "spirals", "xor"])
def test_same_seed_same_bytes(name):
    a_train, a_test = generate_split(name, 64, 32, 0.1, seed=5)
    b_train, b_test = generate_split(name, 64, 32, 0.1, seed=5)
    assert a_train.inputs.tobytes() == b_train.inputs.tobytes()
    assert a_test.labels.tobytes() == b_test.labels.tobytes()
    c_train, _ = generate_split(name, 64, 32, 0.1, seed=6)
    assert c_train.inputs.tobytes() != a_train.inputs.tobytes()


def test_train_and_test_streams_differ():
    train, test = generate_split("spirals", 50, 50, 0.0, seed=0)
    assert not np.array_equal(train.inputs, test.inputs)


def test_spirals_are_balanced_and_bounded():
    train, _ = generate_split("spirals", 1000, 10, 0.0, seed=1)
    counts = np.bincount(train.labels)
    assert counts.tolist() == [500, 500]
    assert np.linalg.norm(train.inputs, axis=1).max() <= 1.0 + 1e-12


def test_noise_free_blobs_are_linearly_separable():
    train, _ = generate_split("blobs", 90, 10, 0.0, seed=2, n_classes=3)
    assert set(train.labels.tolist()) == {0, 1, 2}
    assert _perceptron_separates(train.inputs, train.labels, 3)


def test_xor_labels_follow_quadrants():
    train, _ = generate_split("xor", 400, 10, 0.1, seed=3)
    x = train.inputs
    np.testing.assert_array_equal(train.labels, ((x[:, 0] > 0) ^ (x[:, 1] > 0)).astype(np.int64))


def test_generator_arguments_checked():
    with pytest.raises(DomainError):
        generate_split("moons", 10, 10, 0.1, seed=0)
    with pytest.raises(DomainError):
        generate_split("xor", 10, 10, -1.0, seed=0)
    assert n_classes_of("blobs", 4) == 4
    assert n_classes_of("xor", 4) == 2


def _write_csv(path, rows):
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def test_csv_split(tmp_path):
    rows = {"x1": np.arange(20.0), "x2": -np.arange(20.0), "label": np.arange(20) % 2}
    train, test = read_csv_split(_write_csv(tmp_path / "d.csv", rows), "label", test_fraction=0.25, seed=0)
    assert len(train) == 15 and len(test) == 5
    assert train.input_dim == 2
    merged = np.sort(np.concatenate([train.inputs[:, 0], test.inputs[:, 0]]))
    np.testing.assert_array_equal(merged, np.arange(20.0))


def test_csv_bad_feature_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,x2,label\n1.0,2.0,0\n3.0,oops,1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        read_labeled_csv(path)
    assert err.value.line == 3


def test_csv_bad_label_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,label\n1.0,0\n2.0,1\n3.0,1.5\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        read_labeled_csv(path)
    assert err.value.key == "data.label_column"
    assert err.value.line == 4


def test_csv_missing_label_column(tmp_path):
    path = _write_csv(tmp_path / "d.csv", {"x1": [1.0], "y": [0]})
    with pytest.raises(ConfigError) as err:
        read_labeled_csv(path)
    assert err.value.key == "data.label_column"


def test_make_dataset_from_generator_and_csv(tmp_path):
    split = make_dataset(DataConfig(generator="xor", n_train=40, n_test=20, seed=1))
    assert len(split.train) == 40 and len(split.test) == 20

    rows = {"a": np.linspace(0, 1, 10), "label": [0, 1] * 5}
    train_path = _write_csv(tmp_path / "train.csv", rows)
    test_path = _write_csv(tmp_path / "test.csv", rows)
    split = make_dataset(DataConfig(csv_path=str(train_path), csv_test_path=str(test_path)))
    assert len(split.train) == len(split.test) == 10
