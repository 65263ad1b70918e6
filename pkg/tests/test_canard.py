import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhn.core import PhasePoint, SystemParams, eval_fast, eval_slow, phi
from fhn.dynamics import LimitCycle, Stability
from fhn.errors import BracketFailureError
from fhn.canard import (
    CanardClass,
    asymptotic_loci,
    check_singular_fold,
    classify_canard,
    locate_canard_explosion,
    normal_form_case_i,
    normal_form_case_ii,
    time_near_middle_branch,
    translated_field_case_i,
    translated_field_case_ii,
)
from fhn.singular import FOLD_X, FOLD_Y

small = st.floats(min_value=-0.5, max_value=0.5, allow_nan=False)


class TestSingularFoldChecks:
    def test_fold_equilibrium_of_c_family(self):
        report = check_singular_fold(
            PhasePoint(FOLD_X, FOLD_Y), SystemParams(0.0, FOLD_X, 0.0), param_name="c"
        )
        assert report.is_singular_fold and report.is_regular
        assert report.checks["f_xx"][0] == pytest.approx(-4.0 * math.sqrt(3.0), rel=1e-12)
        assert report.checks["f_y"][0] == -1.0
        assert report.checks["g_x"][0] == 1.0
        assert report.checks["g_lambda"][0] == -1.0

    def test_fold_equilibrium_of_b_family(self):
        # at b = 3/8 the upper equilibrium sqrt(4 - 8/3) = 2/sqrt(3) is the fold
        x_plus = math.sqrt(4.0 - 1.0 / 0.375)
        assert x_plus == pytest.approx(FOLD_X, abs=1e-12)
        report = check_singular_fold(
            PhasePoint(x_plus, phi(x_plus)), SystemParams(0.375, 0.0, 0.0), param_name="b"
        )
        assert report.is_singular_fold and report.is_regular

    def test_generic_point_fails_fold_slope(self):
        report = check_singular_fold(PhasePoint(1.0, 3.0), SystemParams(0.0, 0.0, 0.0))
        assert not report.is_singular_fold
        value, ok = report.checks["f_x"]
        assert value == 1.0 and not ok


class TestNormalFormCoeffs:
    def test_case_i_values(self):
        nf = normal_form_case_i()
        assert nf.a_coeff == -3.0 / 8.0
        assert nf.b_coeff == 0.0
        assert nf.l2 == pytest.approx(-2.0 * math.sqrt(3.0))
        assert (nf.l1, nf.l3, nf.l4, nf.l5, nf.l6) == (1.0, 0.0, 1.0, -1.0, 0.0)

    def test_case_ii_values(self):
        nf = normal_form_case_ii()
        assert nf.a_coeff == -15.0 / 32.0
        assert nf.b_coeff == -3.0 / 16.0
        assert (nf.l1, nf.l3, nf.l4, nf.l5, nf.l6) == (-1.0, 0.0, 1.0, 1.0, -3.0 / 8.0)
        assert nf.x_plus == 4.0 / 3.0

    def test_coefficient_formulas_recompute(self):
        for nf in (normal_form_case_i(), normal_form_case_ii()):
            a = (-nf.dl1_dx + 3 * nf.dl2_dx - 2 * nf.dl4_dx + 2 * nf.l6) / 8.0
            b = (nf.dl3_dx + nf.l6) / 2.0
            assert a == nf.a_coeff and b == nf.b_coeff
            assert nf.a_coeff < 0  # non-degenerate, supercritical in the shifted parameter


class TestTranslatedFields:
    def test_case_i_origin_is_equilibrium(self):
        fx, fy = translated_field_case_i(0.0, 0.0, 0.0, 0.3)
        assert abs(fx) < 1e-15 and abs(fy) < 1e-15

    def test_case_ii_origin_is_equilibrium(self):
        fx, fy = translated_field_case_ii(0.0, 0.0, 0.0, 0.3)
        assert abs(fx) < 1e-15 and abs(fy) < 1e-15

    @settings(max_examples=60)
    @given(small, small, small)
    def test_case_i_matches_cubic_normal_form(self, xb, yb, cbar):
        eps = 0.4
        fx, fy = translated_field_case_i(xb, yb, cbar, eps)
        want_x = -yb + xb * xb * (-2.0 * math.sqrt(3.0) - xb)
        assert fx == pytest.approx(want_x, abs=1e-12)
        assert fy == pytest.approx(eps * (xb + cbar), abs=1e-12)

    @settings(max_examples=60)
    @given(small, small, small)
    def test_case_i_is_exact_coordinate_change(self, xb, yb, cbar):
        eps = 0.4
        c_h = 2.0 / math.sqrt(3.0)
        p = PhasePoint(xb + c_h, yb + phi(c_h))
        params = SystemParams(0.0, c_h - cbar, eps)
        fx, fy = translated_field_case_i(xb, yb, cbar, eps)
        assert fx == eval_fast(p)
        assert fy == eps * eval_slow(p, params)

    @settings(max_examples=60)
    @given(small, small, st.floats(min_value=-0.05, max_value=0.05, allow_nan=False))
    def test_case_ii_is_exact_coordinate_change(self, xb, yb, lam):
        eps = 0.4
        x_plus = math.sqrt(4.0 / 3.0)
        p = PhasePoint(xb + x_plus, yb + 8.0 * x_plus / 3.0)
        params = SystemParams(lam + 0.375, 0.0, eps)
        fx, fy = translated_field_case_ii(xb, yb, lam, eps)
        assert fx == eval_fast(p)
        assert fy == eps * eval_slow(p, params)


class TestAsymptoticLoci:
    def test_case_i_at_half(self):
        loci = asymptotic_loci(normal_form_case_i(), 0.5)
        assert loci.lambda_h == 0.0
        assert loci.lambda_c == pytest.approx(0.1875)
        assert loci.lambda_c_flipped == pytest.approx(-0.1875)

    def test_case_ii_gap(self):
        loci = asymptotic_loci(normal_form_case_ii(), 0.5)
        assert loci.lambda_c - loci.lambda_h == pytest.approx((15.0 / 32.0) * 0.5)
        assert loci.gap == pytest.approx(-(15.0 / 32.0) * 0.5)

    def test_linear_in_eps(self):
        nf = normal_form_case_ii()
        a = asymptotic_loci(nf, 0.4)
        b = asymptotic_loci(nf, 0.2)
        assert a.lambda_h == pytest.approx(2.0 * b.lambda_h)
        assert a.lambda_c == pytest.approx(2.0 * b.lambda_c)

    def test_eps_range_enforced(self):
        with pytest.raises(ValueError):
            asymptotic_loci(normal_form_case_i(), 0.6)
        with pytest.raises(ValueError):
            asymptotic_loci(normal_form_case_i(), 0.0)

    def test_discrepancy_note_present(self):
        assert "authoritative" in asymptotic_loci(normal_form_case_i(), 0.1).note


def _loop(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    t = np.linspace(0.0, 1.0, len(xs))
    return LimitCycle(t, xs, ys, 1.0, 0.0, Stability.STABLE, True, xs[0], 1, 0.0)


def _middle_arc(x_hi, x_lo, n=400):
    xs = np.linspace(x_hi, x_lo, n)
    return xs, phi(xs)


class TestClassifier:
    def test_small_circle_is_hopf_small(self):
        th = np.linspace(0, 2 * np.pi, 200)
        loop = _loop(1.15 + 0.1 * np.cos(th), 3.0 + 0.1 * np.sin(th))
        assert classify_canard(loop) is CanardClass.HOPF_SMALL

    def test_far_rectangle_is_relaxation(self):
        xs = np.concatenate([np.linspace(1.4, 2.3, 50), np.full(50, 2.3),
                             np.linspace(2.3, 1.4, 50), np.full(50, 1.4)])
        ys = np.concatenate([np.full(50, -3.0), np.linspace(-3.0, 3.0, 50),
                             np.full(50, 3.0), np.linspace(3.0, -3.0, 50)])
        assert classify_canard(_loop(xs, ys)) is CanardClass.RELAXATION

    def test_middle_tracking_loop_is_headless(self):
        # down the repelling branch, jump right, back up the right branch
        mx, my = _middle_arc(1.0, -0.5)
        rx = np.linspace(phi_inv_right(my[-1]), phi_inv_right(my[0]), 400)
        xs = np.concatenate([mx, np.linspace(mx[-1], rx[0], 50), rx])
        ys = np.concatenate([my, np.full(50, my[-1]), phi(rx)])
        loop = _loop(xs, ys)
        assert np.all(loop.x > -FOLD_X)
        assert classify_canard(loop) is CanardClass.HEADLESS

    def test_middle_tracking_loop_with_left_excursion_is_headed(self):
        mx, my = _middle_arc(1.0, -0.5)
        xs = np.concatenate([mx, np.linspace(mx[-1], -2.0, 60), np.linspace(-2.0, 1.0, 60)])
        ys = np.concatenate([my, np.full(60, my[-1]), np.full(60, my[0])])
        assert classify_canard(_loop(xs, ys)) is CanardClass.HEADED

    def test_time_near_middle_branch(self):
        mx, my = _middle_arc(1.0, -0.5, n=500)
        loop = _loop(mx, my)  # pure middle-branch arc over unit time
        assert time_near_middle_branch(loop, 0.05) == pytest.approx(1.0, abs=0.02)


def phi_inv_right(y):
    """Right-branch root by bisection; test-local oracle."""
    lo, hi = 2.0 / math.sqrt(3.0) + 1e-9, 4.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestLocator:
    def test_bracket_must_straddle(self):
        with pytest.raises(BracketFailureError):
            locate_canard_explosion(0.5, bracket=(1.10, 1.12))

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            locate_canard_explosion(0.0, bracket=(1.14, 1.154))

    @pytest.mark.slow
    def test_canard_defining_property_at_eps_01(self):
        # located canards track the repelling branch for an O(1) slow time
        eps = 0.1
        cache = {}
        c_star = locate_canard_explosion(eps, bracket=(1.15, 1.1547), cache=cache)
        canards = [
            lc
            for lc in cache.values()
            if classify_canard(lc) in (CanardClass.HEADLESS, CanardClass.HEADED)
        ]
        assert canards, "bisection cache should contain canard cycles"
        for lc in canards:
            assert time_near_middle_branch(lc, 5.0 * eps) >= 0.1

    @pytest.mark.slow
    def test_located_value_near_fold_parameter(self):
        c_star = locate_canard_explosion(0.5, bracket=(1.14, 1.154))
        assert abs(c_star - 2.0 / math.sqrt(3.0)) <= 1.0
