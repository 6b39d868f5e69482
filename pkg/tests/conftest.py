import os

import pytest

from params import load_params, read_config

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEVICE_CONFIG = os.path.join(ROOT, "config", "device.cfg")


@pytest.fixture(scope="session")
def config_path():
    return DEVICE_CONFIG


@pytest.fixture(scope="session")
def device():
    """Shipped device parameters, m2 calibrated on load."""
    return load_params(DEVICE_CONFIG)


@pytest.fixture
def config_doc():
    """Raw config as a mutable mapping."""
    return read_config(DEVICE_CONFIG)
