"""The ten acceptance criteria, one test each.

Thresholds are pinned here rather than imported, so loosening a suite
constant cannot silently weaken a criterion. Each test prints one
PASS/FAIL line (collected again in the terminal summary).
"""
import time

import pytest

from staircase import verify


def _run(suite, **kwargs):
    t0 = time.time()
    checks = suite(**kwargs)
    return checks, time.time() - t0


def _summary(checks, elapsed):
    return "; ".join(f"{c.name}: {c.measured:.4g} ({c.op} {c.threshold:g})" for c in checks) + f"; {elapsed:.1f} s"


class TestAcceptance:
    def test_01_gradient_oracles(self, report):
        checks, dt = _run(verify.suite_gradcheck, instances=100)
        ok = all(c.measured < 1e-5 for c in checks) and dt < 30
        report(1, ok, _summary(checks, dt))
        assert ok

    def test_02_fourier_algebra(self, report):
        checks, dt = _run(verify.suite_fourier, trials=200)
        roundtrip, parseval, sampled = checks
        ok = roundtrip.measured <= 1e-10 and parseval.measured <= 1e-9 and sampled.measured >= 0.95 and dt < 60
        report(2, ok, _summary(checks, dt))
        assert ok

    def test_03_staircase_checker(self, report):
        checks, dt = _run(verify.suite_staircase)
        ok = all(c.passed for c in checks) and dt < 1
        report(3, ok, _summary(checks, dt))
        assert ok

    def test_04_blank_persistence(self, report):
        checks, dt = _run(verify.suite_blank_persistence, trials=100)
        ok = checks[0].measured == 100 and dt < 60
        report(4, ok, _summary(checks, dt))
        assert ok

    def test_05_not_useful_product(self, report):
        checks, dt = _run(verify.suite_not_useful, trials=100)
        ok = checks[0].measured >= 98 and dt < 120
        report(5, ok, _summary(checks, dt))
        assert ok

    def test_06_learns_product(self, report):
        checks, dt = _run(verify.suite_product_frequency, trials=200)
        freq, bad = checks
        ok = freq.measured >= 0.15 and bad.measured == 0 and dt < 300
        report(6, ok, _summary(checks, dt))
        assert ok

    def test_07_end_to_end_layerwise(self, report):
        checks, dt = _run(verify.suite_layerwise, seeds=10)
        good, monotone = checks
        ok = good.measured >= 8 and monotone.passed and dt < 300
        report(7, ok, _summary(checks, dt) + (f"; {good.detail}" if good.detail else ""))
        assert ok

    def test_08_idealized_loss(self, report):
        checks, dt = _run(verify.suite_idealized_loss, configs=50)
        ok = all(c.measured <= 1e-9 for c in checks) and dt < 60
        report(8, ok, _summary(checks, dt))
        assert ok

    def test_09_resnet_fast_variant(self, report):
        checks, dt = _run(verify.suite_resnet, seeds=10)
        hits, inversions = checks
        ok = hits.measured >= 8 and inversions.measured <= 1 and dt < 300
        report(9, ok, "fast variant: " + _summary(checks, dt))
        assert ok

    @pytest.mark.slow
    def test_09_resnet_full_run(self, report):
        checks, dt = _run(verify.suite_resnet_slow, seeds=10)
        hits, inversions, stuck = checks
        ok = hits.measured >= 8 and inversions.measured <= 1 and stuck.measured == 10 and dt < 3600
        report(9, ok, "full run: " + _summary(checks, dt))
        assert ok

    def test_10_theorem_hyperparams(self, report):
        checks, dt = _run(verify.suite_theorem_hyperparams, tuples=20)
        ok = all(c.passed for c in checks) and checks[1].measured <= 1e-12 and dt < 1
        report(10, ok, _summary(checks, dt))
        assert ok
