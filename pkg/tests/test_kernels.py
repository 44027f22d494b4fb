"""Kernel values against closed forms, independent quadratures, and MC."""

import numpy as np
import pytest
from scipy import integrate, special

from driftlab.drifts import FbmDrift, SqrtCuspDrift, TabulatedDrift, ZeroDrift
from driftlab.kernels import (
    FreeGreenKernel,
    KilledGreenKernel,
    MartinKernel,
    QuadratureSettings,
    green_drifted,
    green_free,
    green_free_constant,
    green_free_quadrature,
    green_killed,
    martin_kernel,
    transition_density,
    verify_green_sandwich,
)
from driftlab.randpath import RngStream


class TestTransitionDensity:
    def test_peak_values(self):
        assert transition_density(1, 1.0, [0.0], [0.0]) == pytest.approx(
            1.0 / np.sqrt(2 * np.pi), rel=1e-12
        )
        assert transition_density(2, 1.0, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(
            np.exp(-0.5) / (2 * np.pi), rel=1e-12
        )

    def test_normalization(self):
        # d = 1 directly; d = 2 in polar coordinates.
        total1, _ = integrate.quad(
            lambda v: transition_density(1, 0.7, [0.0], [v]), -np.inf, np.inf
        )
        assert total1 == pytest.approx(1.0, abs=1e-3)
        total2, _ = integrate.quad(
            lambda rho: transition_density(2, 1.3, [0.0, 0.0], [rho, 0.0])
            * 2
            * np.pi
            * rho,
            0,
            np.inf,
        )
        assert total2 == pytest.approx(1.0, abs=1e-3)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            transition_density(2, 0.0, [0.0, 0.0], [1.0, 0.0])


class TestGreenFree:
    def test_closed_form_values(self):
        assert green_free(3, np.zeros(3), [1.0, 0, 0]) == pytest.approx(
            1.0 / (2 * np.pi), rel=1e-12
        )
        assert green_free(4, np.zeros(4), [1.0, 0, 0, 0]) == pytest.approx(
            1.0 / (2 * np.pi**2), rel=1e-12
        )

    def test_homogeneity_d3(self):
        g1 = green_free(3, np.zeros(3), [1.0, 0, 0])
        g2 = green_free(3, np.zeros(3), [2.0, 0, 0])
        assert g2 == pytest.approx(0.5 * g1, rel=1e-14)

    def test_closed_form_vs_quadrature(self):
        for d in (3, 4, 5):
            for r in (0.1, 1.0, 10.0):
                exact = green_free_constant(d) * r ** (2.0 - d)
                quad = green_free_quadrature(d, r)
                assert abs(quad - exact) / exact < 1e-8

    def test_symmetry_and_singularity(self):
        x, y = np.array([0.3, -0.2, 1.0]), np.array([-1.0, 0.4, 0.2])
        assert green_free(3, x, y) == green_free(3, y, x)
        with pytest.raises(ValueError):
            green_free(3, x, x)
        with pytest.raises(ValueError):
            green_free(2, [0.0, 0.0], [1.0, 0.0])


def _killed_trapezoid_oracle(d, lam, r, n=20001):
    """High-resolution trapezoid integration in u = r^2/(2t) on a log grid."""
    s = np.linspace(np.log(1e-10), np.log(80.0), n)
    u = np.exp(s)
    t = r * r / (2.0 * u)
    vals = (2 * np.pi * t) ** (-d / 2.0) * np.exp(-u - lam * t) * (r * r / (2 * u * u))
    return np.trapezoid(vals * u, s)


class TestGreenKilled:
    def test_small_lambda_limit_d3(self):
        # The limit is monotone; at lam = 1e-8 the gap to the free kernel
        # is below 1e-4 (at 1e-6 the true gap is already 2.25e-4).
        free = green_free(3, np.zeros(3), [1.0, 0, 0])
        small = green_killed(3, 1e-8, np.zeros(3), [1.0, 0, 0])
        assert small < free
        assert free - small < 1e-4

    def test_exact_lambda_dependence_d3(self):
        # d = 3 has the elementary form G_lam = e^{-sqrt(2 lam) r} / (2 pi r).
        for lam in (1e-6, 0.3, 2.0):
            got = green_killed(3, lam, np.zeros(3), [1.0, 0, 0])
            want = np.exp(-np.sqrt(2 * lam)) / (2 * np.pi)
            assert got == pytest.approx(want, rel=1e-8)

    def test_d2_against_trapezoid_oracle(self):
        got = green_killed(2, 1.0, [0.0, 0.0], [1.0, 0.0])
        oracle = _killed_trapezoid_oracle(2, 1.0, 1.0)
        assert abs(got - oracle) / oracle < 1e-6
        # Third route: modified Bessel closed form.
        assert got == pytest.approx(special.k0(np.sqrt(2.0)) / np.pi, rel=1e-8)

    def test_monotone_in_lambda(self):
        vals = [green_killed(3, lam, np.zeros(3), [1.0, 0, 0]) for lam in (0.5, 1, 2)]
        assert vals[0] > vals[1] > vals[2]

    def test_symmetry(self):
        x, y = np.array([0.1, 0.9]), np.array([-0.4, 0.3])
        assert green_killed(2, 1.0, x, y) == green_killed(2, 1.0, y, x)

    def test_validation(self):
        with pytest.raises(ValueError):
            green_killed(2, 0.0, [0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            green_killed(2, 1.0, [0.0, 0.0], [0.0, 0.0])


class TestGreenDrifted:
    def test_zero_drift_matches_free(self):
        got = green_drifted(ZeroDrift(3), np.zeros(3), np.array([1.0, 0, 0]))
        assert got == pytest.approx(1.0 / (2 * np.pi), rel=1e-8)

    def test_zero_drift_matches_killed_d2(self):
        got = green_drifted(
            ZeroDrift(2), np.zeros(2), np.array([1.0, 0.0]), lam=1.0
        )
        want = green_killed(2, 1.0, [0.0, 0.0], [1.0, 0.0])
        assert got == pytest.approx(want, rel=1e-8)

    def test_constant_drift_same_as_zero(self):
        const = TabulatedDrift(
            [0.0, 1.0], np.tile([0.7, -0.2, 0.1], (2, 1)), extend="clamp"
        )
        got = green_drifted(const, np.zeros(3), np.array([1.0, 0, 0]))
        assert got == pytest.approx(1.0 / (2 * np.pi), rel=1e-8)

    def test_d2_requires_killing(self):
        with pytest.raises(ValueError):
            green_drifted(ZeroDrift(2), np.zeros(2), np.array([1.0, 0.0]))

    def test_singular_point_rejected(self):
        with pytest.raises(ValueError):
            green_drifted(ZeroDrift(3), np.zeros(3), np.zeros(3))

    def test_bounded_drift_tail_not_controllable(self):
        # A drift living on [0, 1] cannot reach the d = 3 horizon.
        f = FbmDrift(0.3, 5, 3, coordinate=0, levels=8, horizon=1.0)
        with pytest.raises(ValueError):
            green_drifted(f, np.zeros(3), np.array([1.0, 0, 0]))

    def test_cusp_within_sandwich_at_fresh_radius(self):
        f = SqrtCuspDrift(1.0, [1.0, 0.0, 0.0])
        rep = verify_green_sandwich(
            f,
            3,
            np.logspace(-2, 2, 9),
            directions=[[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]],
            tighten=False,
        )
        r = 0.37  # not on the scanned grid
        ratio = green_drifted(f, np.zeros(3), np.array([r, 0, 0])) / green_free(
            3, np.zeros(3), [r, 0, 0]
        )
        assert rep.c1 - 1e-6 <= ratio <= rep.c2 + 1e-6

    def test_cusp_against_mc_occupation_oracle(self):
        # Occupation-time oracle: E of time spent within eps of y, divided
        # by the ball volume, estimates the Green kernel of B + f.
        d, eps, r_esc, h = 3, 0.25, 16.0, 2.0**-8
        t_cap = 400.0
        replicas = 8000
        y = np.array([1.0, 0.0, 0.0])
        f = SqrtCuspDrift(1.0, [1.0, 0.0, 0.0])

        gen = RngStream(2024).generator()
        pos = np.zeros((replicas, d))
        occ = np.zeros(replicas)
        alive = np.ones(replicas, dtype=bool)
        n_steps = int(t_cap / h)
        sqrt_h = np.sqrt(h)
        f_vals = f.values(np.arange(n_steps + 1) * h)
        for k in range(n_steps):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            pos[idx] += gen.standard_normal((idx.size, d)) * sqrt_h
            x_drifted = pos[idx] + f_vals[k + 1]
            dist = np.linalg.norm(x_drifted - y, axis=1)
            occ[idx] += h * (dist < eps)
            alive[idx] = dist < r_esc
        vol = 4.0 / 3.0 * np.pi * eps**3
        mc = occ.mean() / vol
        se = occ.std(ddof=1) / np.sqrt(replicas) / vol

        want = green_drifted(f, np.zeros(3), y)
        # Escape truncation and finite-horizon allowances, both relative
        # to the free kernel scale, plus the eps-averaging error.
        tail = (2 * np.pi) ** -1.5 * 2 / np.sqrt(t_cap) / vol * vol
        escape = green_free_constant(3) / (r_esc - 1.0)
        smoothing = 0.05 * want
        assert abs(mc - want) < 3 * se + tail + escape + smoothing


class TestMartinKernel:
    def setup_method(self):
        self.spec = MartinKernel(FreeGreenKernel(3), np.zeros(3))

    def test_reference_point_gives_one(self):
        for y in ([1.0, 2.0, 0.5], [0.1, 0.0, 0.0]):
            assert martin_kernel(self.spec, np.zeros(3), y) == pytest.approx(1.0)

    def test_ratio_value(self):
        # |y| = 2 from the reference, |x - y| = 1: ratio of r^{-1} values is 2.
        y = np.array([2.0, 0.0, 0.0])
        x = np.array([1.0, 0.0, 0.0])
        assert martin_kernel(self.spec, x, y) == pytest.approx(2.0, rel=1e-12)

    def test_dilation_invariance(self):
        gen = np.random.default_rng(5)
        x = gen.normal(size=3)
        y = gen.normal(size=3) + 3.0
        x0 = gen.normal(size=3) - 2.0
        vals = []
        for c in (0.5, 1.0, 7.0):
            spec = MartinKernel(FreeGreenKernel(3), c * x0)
            vals.append(martin_kernel(spec, c * x, c * y))
        assert abs(vals[0] - vals[1]) < 1e-12 * abs(vals[1])
        assert abs(vals[2] - vals[1]) < 1e-12 * abs(vals[1])

    def test_singularities(self):
        with pytest.raises(ValueError):
            martin_kernel(self.spec, np.ones(3), np.zeros(3))
        with pytest.raises(ValueError):
            martin_kernel(self.spec, np.ones(3), np.ones(3))

    def test_killed_base(self):
        spec = MartinKernel(KilledGreenKernel(2, 1.0), np.zeros(2))
        got = martin_kernel(spec, [1.0, 0.0], [1.0, 1.0])
        want = green_killed(2, 1.0, [1.0, 0.0], [1.0, 1.0]) / green_killed(
            2, 1.0, [0.0, 0.0], [1.0, 1.0]
        )
        assert got == pytest.approx(want, rel=1e-10)


class TestGreenSandwich:
    def test_zero_drift_ratio_is_one(self):
        rep = verify_green_sandwich(
            ZeroDrift(3), 3, np.logspace(-2, 2, 7), tighten=False
        )
        assert rep.c1 == pytest.approx(1.0, abs=1e-6)
        assert rep.c2 == pytest.approx(1.0, abs=1e-6)

    def test_cusp_d3_two_sided_and_rotation(self):
        dirs = [[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]]
        f = SqrtCuspDrift(1.0, [1.0, 0.0, 0.0])
        rep = verify_green_sandwich(
            f, 3, np.logspace(-2, 2, 13), directions=dirs, tighten=True
        )
        assert 0.0 < rep.c1 <= 1.0 <= rep.c2 < np.inf
        assert rep.stable
        # Rotating the drift (and the probe directions with it) leaves the
        # constants unchanged up to the 10% stability budget.
        dirs_rot = [[0, 1.0, 0], [0, -1.0, 0], [0, 0, 1.0]]
        f_rot = SqrtCuspDrift(1.0, [0.0, 1.0, 0.0])
        rep_rot = verify_green_sandwich(
            f_rot, 3, np.logspace(-2, 2, 13), directions=dirs_rot, tighten=False
        )
        assert abs(rep_rot.c1 - rep.c1) <= 0.1 * rep.c1
        assert abs(rep_rot.c2 - rep.c2) <= 0.1 * rep.c2

    def test_cusp_d3_scale_window_invariance(self):
        # Constants measured on [0.01, 1] match those on [1, 100]: they
        # depend only on d and the Holder constant.
        f = SqrtCuspDrift(1.0, [1.0, 0.0, 0.0])
        dirs = [[1.0, 0, 0], [-1.0, 0, 0]]
        lo = verify_green_sandwich(
            f, 3, np.logspace(-2, 0, 7), directions=dirs, tighten=False
        )
        hi = verify_green_sandwich(
            f, 3, np.logspace(0, 2, 7), directions=dirs, tighten=False
        )
        assert abs(lo.c1 - hi.c1) <= 0.1 * hi.c1
        assert abs(lo.c2 - hi.c2) <= 0.1 * hi.c2

    def test_d2_killed_sandwich(self):
        f = SqrtCuspDrift(1.0, [1.0, 0.0])
        rep = verify_green_sandwich(
            f,
            2,
            np.logspace(-2, 1, 10),
            lam=1.0,
            directions=[[1.0, 0], [-1.0, 0]],
            tighten=False,
        )
        assert 0.0 < rep.c1 <= rep.c2 < np.inf

    def test_killing_rules(self):
        with pytest.raises(ValueError):
            verify_green_sandwich(SqrtCuspDrift(1.0, [1.0, 0, 0]), 3, [1.0], lam=0.5)
        with pytest.raises(ValueError):
            verify_green_sandwich(SqrtCuspDrift(1.0, [1.0, 0]), 2, [1.0])

    def test_quadrature_settings_validation(self):
        with pytest.raises(ValueError):
            QuadratureSettings(rel_tol=0.0)
