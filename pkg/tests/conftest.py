import numpy as np
import pytest


class ConstantSampler:
    def __init__(self, value):
        self.value = value
        self.draws = 0

    def draw(self):
        self.draws += 1
        return self.value


class NormalSampler:
    """Normal population that counts draws; exposes both draw APIs."""

    def __init__(self, mean, sd, rng):
        self.mean, self.sd, self.rng = mean, sd, rng
        self.draws = 0

    def draw(self):
        self.draws += 1
        return float(self.rng.normal(self.mean, self.sd))

    def draw_many(self, m):
        self.draws += m
        return self.rng.normal(self.mean, self.sd, m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    def add(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
