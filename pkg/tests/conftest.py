import pytest

from facefool import TrainConfig, desk_dataset, split_train_test, train_softmax
from facefool.rng import Pcg32


@pytest.fixture(scope="session")
def desk_data():
    return desk_dataset()


@pytest.fixture(scope="session")
def desk_split(desk_data):
    return split_train_test(desk_data, 1, Pcg32(0))


@pytest.fixture(scope="session")
def desk_model(desk_split):
    train, _ = desk_split
    return train_softmax(train, TrainConfig())
