import shutil

import pytest

from mcuml.dataset import SynthSpec, synth_dataset
from mcuml.toolchain import HostToolchain, builtin_platform

HAS_CC = shutil.which("cc") is not None

requires_cc = pytest.mark.skipif(not HAS_CC, reason="no host C compiler on PATH")


@pytest.fixture(scope="session")
def lte_small():
    return synth_dataset(SynthSpec("lte_regression", 300), seed=7)


@pytest.fixture(scope="session")
def vehicle_small():
    return synth_dataset(SynthSpec("vehicle_classification", 350), seed=3)


@pytest.fixture(scope="session")
def host_platform():
    return builtin_platform("host")


@pytest.fixture(scope="session")
def host_toolchain():
    tc = HostToolchain()
    yield tc
    tc.cleanup()
