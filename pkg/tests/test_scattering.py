import numpy as np
import pytest

from rhkdv import scattering as sc


@pytest.fixture(scope="module")
def step():
    return sc.step_scattering(1.0)


@pytest.fixture(scope="module")
def step_pot():
    return sc.pure_step_potential(1.0)


@pytest.fixture(scope="module")
def smooth_pot():
    return sc.smoothed_step_potential(1.0)


class TestStepClosedForms:
    def test_rejects_bad_c(self):
        with pytest.raises(ValueError):
            sc.step_scattering(-1.0)

    def test_R_decays(self, step):
        assert abs(step.R(50.0)) < 1e-3
        assert abs(step.R(500.0)) < 1e-5

    def test_R_bounded_and_unitarity(self, step):
        # 1 - |R|^2 = |T|^2 * k1/k on the real line
        for k in (0.5, 1.0, 2.0):
            k1 = sc.k1_branch(k, 1.0)
            assert abs(step.R(k)) < 1.0
            lhs = 1.0 - abs(step.R(k)) ** 2
            rhs = abs(step.T(k)) ** 2 * (k1 / k).real
            assert abs(lhs - rhs) < 1e-12

    def test_chi_vanishes_at_ic(self, step):
        assert abs(step.chi(1j * (1 - 1e-4))) < 0.06

    def test_chi_plus_imaginary_on_cut(self, step):
        for y in (0.2, 0.5, 0.9):
            v = step.chi(1j * y, side=+1)
            assert abs(v.real) < 1e-14
            assert v.imag > 0
            # chi_+ = -chi_-
            assert abs(v + step.chi(1j * y, side=-1)) < 1e-14

    def test_k1_branch_sides(self):
        # limit from Re k > 0 is +sqrt(c^2-y^2) on the whole cut
        c = 1.0
        for y in (0.75, -0.75):
            lim = sc.k1_branch(1e-9 + 1j * y, c)
            assert abs(sc.k1_branch(1j * y, c, +1) - lim) < 1e-8
            assert abs(sc.k1_branch(1j * y, c, -1) + lim) < 1e-8
        # odd and ~k at infinity
        k = 3.0 + 2.0j
        assert abs(sc.k1_branch(-k, c) + sc.k1_branch(k, c)) < 1e-14
        assert abs(sc.k1_branch(1e6j * c, c) / (1e6j * c) - 1) < 1e-11


class TestJostOracle:
    def test_zero_potential(self):
        x = np.linspace(-10, 10, 50)
        pot = sc.SampledPotential(x=x, q=np.zeros_like(x), c=0.0)
        for k in (0.7, 1.5):
            T, R, _ = sc.jost_oracle(pot, k)
            assert abs(T - 1.0) < 1e-9
            assert abs(R) < 1e-9

    def test_pure_step_agreement(self, step, step_pot):
        # closed forms vs ODE oracle on a real-k grid
        worst = 0.0
        for k in np.linspace(0.3, 2.6, 20):
            T, R, chi = sc.jost_oracle(step_pot, k)
            worst = max(worst, abs(R - step.R(k)), abs(T - step.T(k)),
                        abs(chi - step.chi(k)))
        assert worst < 1e-5

    def test_pure_step_at_1p3c(self, step, step_pot):
        _, R, _ = sc.jost_oracle(step_pot, 1.3)
        assert abs(R - step.R(1.3)) < 1e-6

    def test_oddness_both_paths(self, step, step_pot, smooth_pot):
        rng = np.random.default_rng(7)
        osd = sc.oracle_scattering(smooth_pot, n_band=8)
        for _ in range(50):
            k = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.2, 1.2))
            if abs(k) < 0.1:
                continue
            assert abs(step.chi(k) + step.chi(-k)) < 1e-8
        for y in (0.25, 0.55, 0.85):
            assert abs(osd.chi(1j * y) + osd.chi(-1j * y)) < 1e-8

    def test_smoothed_chi_imaginary_on_cut(self, smooth_pot):
        for y in (0.2, 0.5, 0.8):
            _, _, chi = sc.jost_oracle(smooth_pot, 1j * y)
            assert abs(chi.real) < 1e-8 * abs(chi)
            assert chi.imag > 0

    def test_chi_continuity_on_cut(self, step):
        y = np.linspace(0.05, 0.95, 60)
        vals = np.array([abs(step.chi(1j * yy)) for yy in y])
        d = np.diff(vals)
        # finite-difference increments bounded by 10x local derivative scale
        h = y[1] - y[0]
        deriv = np.gradient(vals, y)
        assert np.all(np.abs(d) <= 10 * (np.abs(deriv[:-1]) + 1e-3) * h)

    def test_log_abs_chi_band_interp(self, smooth_pot):
        osd = sc.oracle_scattering(smooth_pot, n_band=30)
        for y in (0.17, 0.48, 0.81):
            direct = np.log(abs(sc.jost_oracle(smooth_pot, 1j * y)[2]))
            assert abs(osd.log_abs_chi_band(y) - direct) < 1e-6


class TestLoadPotential:
    def _write(self, tmp_path, rows, header=False):
        p = tmp_path / "pot.csv"
        with open(p, "w") as fh:
            if header:
                fh.write("x,q\n")
            for x, q in rows:
                fh.write("%.16g,%.16g\n" % (x, q))
        return p

    def test_roundtrip(self, tmp_path, smooth_pot):
        p = self._write(tmp_path, zip(smooth_pot.x, smooth_pot.q), header=True)
        pot = sc.load_potential(p)
        assert pot.c == pytest.approx(1.0)
        assert np.allclose(pot.q, smooth_pot.q)

    def test_rejects_non_monotone(self, tmp_path):
        p = self._write(tmp_path, [(0.0, -1.0), (-1.0, 0.0), (1.0, 0.0)])
        with pytest.raises(ValueError, match="non-monotone"):
            sc.load_potential(p)

    def test_rejects_bad_tail(self, tmp_path):
        x = np.linspace(-30, 30, 200)
        q = np.where(x < 0, -0.9, 0.0)
        pot = sc.SampledPotential(x=x, q=q, c=np.sqrt(0.9))
        with pytest.raises(ValueError, match="measured"):
            sc.SampledPotential(x=x, q=q, c=1.0)
        assert pot.c == pytest.approx(np.sqrt(0.9))

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("0.0,-1.0\nfoo,bar\n")
        with pytest.raises(ValueError, match="line 2"):
            sc.load_potential(p)
