import time
from functools import lru_cache

import pytest

from netcpd.calibration import CalibrationTarget, calibrate_c1, false_alarm_rate, null_profiles, rho_from_spec
from netcpd.detector import DetectorConfig
from netcpd.generators import scenario

_criteria = []


class NullSetup:
    """Scenario-1 pre-change law at n = 100 with 200 calibration and 200 fresh null profiles.

    ``seconds`` accumulates all profile work done through this object, so a
    test sharing it can report the full cost of its checks.
    """

    reps = 200
    fresh_base = 10_000

    def __init__(self):
        start = time.perf_counter()
        self.spec = scenario(1, 100).null()
        rho_hat = rho_from_spec(self.spec, 200, self.reps)
        self.cfg = DetectorConfig(mode="alpha", alpha=0.05, rho_hat=rho_hat)
        self.calibration = null_profiles(self.spec, self.cfg, range(self.reps))
        self.fresh = null_profiles(self.spec, self.cfg, range(self.fresh_base, self.fresh_base + self.reps))
        self.seconds = time.perf_counter() - start

    @lru_cache(maxsize=None)
    def c1(self, t_train: int) -> float:
        start = time.perf_counter()
        target = CalibrationTarget(alpha=0.05, t_train=t_train, reps=self.reps)
        result = calibrate_c1(self.spec, self.cfg, target, profiles=self.calibration)
        self.seconds += time.perf_counter() - start
        return result.c1

    def fresh_rate(self, c1: float, t_train: int) -> float:
        start = time.perf_counter()
        rate = false_alarm_rate(self.fresh, c1, t_train)
        self.seconds += time.perf_counter() - start
        return rate


@pytest.fixture(scope="session")
def s1_null():
    return NullSetup()


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _criteria.append((props["criterion"], report.passed, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_criteria, key=lambda c: int(c[0].split()[0])):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {label}: {detail}")
