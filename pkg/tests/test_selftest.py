import pytest

from fas_aris.selftest import selftest


@pytest.fixture(scope="module")
def report():
    return selftest()


class TestSelftest:
    def test_all_checks_pass(self, report):
        assert len(report.checks) >= 12
        assert report.ok, report.format()
        assert len({c.name for c in report.checks}) == len(report.checks)

    def test_format(self, report):
        text = report.format()
        assert text.count("PASS") == len(report.checks)
        assert text.rstrip().endswith(f"{len(report.checks)}/{len(report.checks)} checks passed")

    def test_perturbed_gradient_is_caught(self):
        bad = selftest(perturb_gradient=1e-3)
        failed = {c.name for c in bad.checks if not c.passed}
        assert failed == {"gradient_vs_fd"}
