import numpy as np
import pytest

from flagstat import FlagSignature, make_flag
from flagstat.numerics import thin_qr


def random_flag(gen, sig):
    return make_flag(thin_qr(gen.standard_normal((sig.ambient, sig.dk)))[0], sig)


def near_flag(gen, center, noise):
    return make_flag(thin_qr(center.rep + noise * gen.standard_normal(center.rep.shape))[0], center.signature)


@pytest.fixture
def gen():
    return np.random.default_rng(20240607)


@pytest.fixture
def sig13():
    return FlagSignature((1, 3), 10)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
