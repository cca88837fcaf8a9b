import json
from importlib import resources

import pytest

from balbot import model


def _data_path(name):
    return resources.files("balbot").joinpath("data", name)


@pytest.fixture(scope="session")
def reference_params():
    """Measured parameters of the reference robot, loaded from the bundled file."""
    with resources.as_file(_data_path("reference_params.txt")) as p:
        return model.load_params(p)


@pytest.fixture(scope="session")
def reference_gains():
    return json.loads(_data_path("reference_gains.json").read_text())


@pytest.fixture(scope="session")
def reference_tf():
    return json.loads(_data_path("reference_tf.json").read_text())


@pytest.fixture(scope="session")
def reference_motor():
    return json.loads(_data_path("reference_motor.json").read_text())
