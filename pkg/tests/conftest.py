from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from sleepstates.model import Series
from sleepstates.synth import SynthConfig, generate

START = datetime(2023, 1, 5, 12, 0, tzinfo=timezone(timedelta(hours=-5)))


def make_series(anglez, enmo=None, cadence=5, series_id="s1", start=START, first_step=0):
    anglez = np.asarray(anglez, dtype=float)
    n = len(anglez)
    if enmo is None:
        enmo = np.full(n, 0.01)
    epoch = int(start.timestamp()) + np.arange(n) * cadence
    offset = int(start.utcoffset().total_seconds())
    return Series(series_id, first_step + np.arange(n), epoch, np.full(n, offset), anglez, enmo, cadence)


@pytest.fixture(scope="session")
def one_day():
    return generate(SynthConfig(n_days=1, rng_seed=7))


@pytest.fixture(scope="session")
def three_days():
    return generate(SynthConfig(n_days=3, rng_seed=21, nonwear_segments=((1.0, 120),)))


# -- acceptance summary ----------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome: ``criterion(n, ok, detail)``."""

    def record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
