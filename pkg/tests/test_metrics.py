import mpmath
import numpy as np
import pytest

from fas_aris.channel import AntennaLayout, Channels, aris_element_positions
from fas_aris.metrics import (Solution, achievable_rate, aris_power, check_feasibility, noise_power,
                              pairwise_min_distance, received_signal_power)


def _random_channels(rng, m=3, n=2):
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)
    return Channels(c(m, n) * 1e-4, c(m) * 1e-4, c(n) * 1e-6)


class TestRate:
    def test_against_mpmath(self, rng):
        ch = _random_channels(rng)
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        e = rng.normal(size=3) + 1j * rng.normal(size=3)
        mpmath.mp.dps = 40
        mp = lambda a: mpmath.matrix([complex(v) for v in np.ravel(a)])
        hbr = mpmath.matrix(ch.h_br.tolist())
        # (h_ru E h_br + h_bu) w evaluated entirely in mpmath
        row = [sum(ch.h_ru[m] * e[m] * hbr[m, k] for m in range(3)) + ch.h_bu[k] for k in range(2)]
        sig = abs(sum(row[k] * mp(w)[k] for k in range(2))) ** 2
        noise = mpmath.mpf(1e-3) * sum(abs(ch.h_ru[m] * e[m]) ** 2 for m in range(3)) + mpmath.mpf(1e-12)
        ref = mpmath.log(1 + sig / noise, 2)
        assert achievable_rate(ch, w, e, 1e-3, 1e-12) == pytest.approx(float(ref), rel=1e-12)
        assert received_signal_power(ch, w, e) == pytest.approx(float(sig), rel=1e-12)
        assert noise_power(ch, e, 1e-3, 1e-12) == pytest.approx(float(noise), rel=1e-12)

    def test_zero_beam_and_phase_invariance(self, rng):
        ch = _random_channels(rng)
        e = rng.normal(size=3) + 0j
        assert achievable_rate(ch, np.zeros(2), e, 1e-3, 1e-12) == 0.0
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        r = achievable_rate(ch, w, e, 1e-3, 1e-12)
        assert achievable_rate(ch, np.exp(2.1j) * w, e, 1e-3, 1e-12) == pytest.approx(r, abs=1e-12)

    def test_zero_surface_reduces_to_direct_link(self, rng):
        ch = _random_channels(rng)
        w = np.array([1.0, 0.5j])
        rate = achievable_rate(ch, w, np.zeros(3), 1.0, 1e-12)
        assert rate == pytest.approx(np.log2(1 + abs(ch.h_bu @ w) ** 2 / 1e-12))


class TestArisPower:
    def test_matches_matrix_form(self, rng):
        ch = _random_channels(rng)
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        e = rng.normal(size=3) + 1j * rng.normal(size=3)
        E = np.diag(e)
        ref = np.linalg.norm(E @ ch.h_br @ w) ** 2 + 0.01 * np.trace(E @ E.conj().T).real
        assert aris_power(ch, w, e, 0.01) == pytest.approx(ref, rel=1e-12)

    def test_nonnegative_and_quadratic_in_e(self, rng):
        ch = _random_channels(rng)
        w = rng.normal(size=2) + 0j
        e = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert aris_power(ch, w, 3 * e, 0.01) == pytest.approx(9 * aris_power(ch, w, e, 0.01))


class TestFeasibility:
    def test_min_distance(self):
        d, pair = pairwise_min_distance(np.array([[0, 0], [3, 4], [0, 1]]))
        assert d == 1.0 and pair == (0, 2)
        assert pairwise_min_distance(np.zeros((1, 2)))[1] is None

    def _sol(self, t_bar, w, e):
        return Solution(np.asarray(w, complex), np.asarray(e, complex),
                        AntennaLayout(np.asarray(t_bar, float), aris_element_positions(len(e), 0.25)))

    def test_reports_each_violation(self, cfg, rng):
        ch = _random_channels(rng, m=cfg.m_elements, n=2)
        far = [[0.0, 0.0], [0.3, 0.0]]
        ok = self._sol(far, [1e-3, 0], np.zeros(4))
        assert check_feasibility(ok, ch, cfg).ok
        names = lambda s, **kw: {v[0] for v in check_feasibility(s, ch, cfg, **kw).violations}
        assert names(self._sol(far, [1.0, 0], np.zeros(4))) == {"bs_power"}
        assert names(self._sol([[0, 0], [0.01, 0]], [1e-3, 0], np.zeros(4))) == {"min_dist"}
        assert names(self._sol([[0, 0], [0.9, 0]], [1e-3, 0], np.zeros(4))) == {"region"}
        assert names(self._sol([[0, 0], [0.9, 0]], [1e-3, 0], np.zeros(4)), region=False) == set()
        big = self._sol(far, [1e-3, 0], 1e6 * np.ones(4))
        assert "aris_power" in names(big)
        assert names(big, aris_budget=False) == set()
        assert names(self._sol(far, [1e-3, 0], 0.5 * np.ones(4)), unit_modulus=True) == {"unit_modulus"}
