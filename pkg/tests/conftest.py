import numpy as np
import pytest

from mcasv.geometry import build_paper_array

FS = 16000


def tone(freq, n=FS // 2, fs=FS, phase=0.0):
    return np.cos(2 * np.pi * freq * np.arange(n) / fs + phase)


def xcorr_lag(x, y, upsample=64):
    """Lag of y relative to x from the band-limited interpolated cross-correlation peak."""
    n = x.size + y.size
    spec = np.conj(np.fft.rfft(x, n)) * np.fft.rfft(y, n)
    dense = np.fft.irfft(spec, n * upsample)
    k = int(np.argmax(dense))
    a, b, c = dense[k - 1], dense[k], dense[(k + 1) % dense.size]
    k = k + 0.5 * (a - c) / (a - 2 * b + c)
    lag = k / upsample
    return lag - n if lag > n / 2 else lag


def rel_err(analytic, reference):
    analytic, reference = np.asarray(analytic), np.asarray(reference)
    return np.max(np.abs(analytic - reference)) / max(np.max(np.abs(reference)), 1e-300)


@pytest.fixture(scope="session")
def geom():
    return build_paper_array()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
