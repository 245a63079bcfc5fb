import numpy as np
import pytest

from fedtrigger import data, nn


@pytest.fixture(scope="session")
def small_task():
    """Normalized 3-class, 12-feature problem with a briefly trained model."""
    ds = data.synthesize(12, 3, 60, 4.0, 5)
    train, test = data.split(ds, 0.25, 1)
    train, scaler = data.normalize(train)
    test = test.replace(X=scaler.transform(test.X))
    arch = nn.ModelArch(12, ((16, "relu"),), 3)
    model = nn.train(nn.init_params(arch, 0), train, nn.TrainConfig(5, 10, 0.01, seed=0))
    return train, test, model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
