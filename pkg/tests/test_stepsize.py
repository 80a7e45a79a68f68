import math

import pytest
from hypothesis import given, strategies as st

from adabb.core import CaseTag
from adabb.exceptions import InvalidState
from adabb.stepsize import (OPTION_I, OPTION_II, ControllerKind, Method, adabb_sc_step, adabb_step, adapbb_step,
                            baseline_step, classify, initial_theta, next_step, theta0_init)

SQRT2 = math.sqrt(2.0)
# 50-digit oracle values
SQRT_1_5 = 1.2247448713915890490986420373529456959829737403283
OPT_I_II_THETA = 0.81649658092772603273242802490196379732198249355222
OPT_I_III = 0.36514837167011074230464652186720142263516312999866
INV_SQRT2 = 0.70710678118654752440084436210484903928483593768847


class TestTheta0:
    def test_case_i_branch(self):
        assert theta0_init(2.0, 1.0) == 1.0
        alpha_1 = adabb_step(2.0, 1.0, theta0_init(2.0, 1.0)).alpha_k
        assert alpha_1 == pytest.approx(2.0 / SQRT2, rel=1e-15)

    def test_second_branch(self):
        assert theta0_init(1.0, 1.0) == 0.0

    def test_boundary_continuity(self):
        assert theta0_init(SQRT2 * 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
    def test_first_step_is_lambda_over_sqrt2(self, lam, a0):
        th = theta0_init(lam, a0)
        assert th >= 0
        if lam >= SQRT2 * a0:
            d = adabb_step(lam, a0, th)
            assert d.case_tag is CaseTag.CASE_I
            assert abs(d.alpha_k - lam / SQRT2) <= 1e-14 * lam

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidState):
            theta0_init(0.0, 1.0)


class TestAdaBB:
    def test_case_i(self):
        d = adabb_step(1.0, 0.5, 1.0)
        assert d.case_tag is CaseTag.CASE_I
        assert d.alpha_k == pytest.approx(SQRT2 * 0.5, rel=1e-15)
        assert d.theta_k == pytest.approx(SQRT2, rel=1e-15)

    def test_case_ii_option_ii(self):
        d = adabb_step(0.75, 1.0, 1.0)
        assert d.case_tag is CaseTag.CASE_II
        assert d.alpha_k == 0.75 and d.theta_k == pytest.approx(0.5, rel=1e-15)

    def test_case_ii_option_i(self):
        d = adabb_step(0.75, 1.0, 1.0, OPTION_I, OPTION_II)
        assert d.alpha_k == pytest.approx(SQRT_1_5, rel=1e-15)
        assert d.theta_k == pytest.approx(OPT_I_II_THETA, rel=1e-15)

    def test_case_iii_option_ii(self):
        d = adabb_step(0.4, 1.0, 1.0)
        assert d.case_tag is CaseTag.CASE_III
        assert d.alpha_k == pytest.approx(0.4 / SQRT2, rel=1e-15)
        assert d.theta_k == pytest.approx(0.4 / SQRT2, rel=1e-15)

    def test_case_iii_option_i(self):
        d = adabb_step(0.4, 1.0, 1.0, OPTION_II, OPTION_I)
        assert d.alpha_k == pytest.approx(OPT_I_III, rel=1e-15)

    def test_infinite_lambda_is_case_i(self):
        d = adabb_step(math.inf, 1.0, 3.0)
        assert d.case_tag is CaseTag.CASE_I and d.alpha_k == 2.0

    def test_boundaries(self):
        assert classify(1.0, 1.0) is CaseTag.CASE_I
        assert classify(0.5, 1.0) is CaseTag.CASE_III
        assert classify(0.5000001, 1.0) is CaseTag.CASE_II

    def test_invalid_inputs(self):
        with pytest.raises(InvalidState):
            adabb_step(1.0, 0.0, 1.0)
        with pytest.raises(InvalidState):
            adabb_step(-1.0, 1.0, 1.0)
        with pytest.raises(InvalidState):
            adabb_step(1.0, 1.0, -0.1)


class TestStronglyConvex:
    def test_case_i(self):
        d = adabb_sc_step(2.0, 1.0, 1.0, eta=0.5, delta=1.5)
        assert d.alpha_k == pytest.approx(SQRT_1_5, rel=1e-15)

    def test_middle_branch(self):
        d = adabb_sc_step(0.9, 1.0, 1.0, eta=0.5, delta=1.5)
        assert d.case_tag is CaseTag.CASE_II
        assert d.alpha_k == 0.9 and d.theta_k == pytest.approx(0.8, rel=1e-15)

    def test_case_iii(self):
        d = adabb_sc_step(0.5, 1.0, 1.0, eta=0.5, delta=1.5)
        assert d.case_tag is CaseTag.CASE_III
        assert d.alpha_k == pytest.approx(0.5 / SQRT2, rel=1e-15)

    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(0, 1e6))
    def test_never_exceeds_lambda(self, lam, ap, th):
        assert adabb_sc_step(lam, ap, th).alpha_k <= lam

    def test_parameter_ranges(self):
        with pytest.raises(InvalidState):
            adabb_sc_step(1.0, 1.0, 1.0, eta=1.0)
        with pytest.raises(InvalidState):
            adabb_sc_step(1.0, 1.0, 1.0, delta=2.0)


class TestProximal:
    def test_cases(self):
        d = adapbb_step(2.0, 1.0, 1.0)
        assert d.alpha_k == pytest.approx(SQRT2, rel=1e-15) and d.theta_k == pytest.approx(SQRT2, rel=1e-15)
        d = adapbb_step(0.75, 1.0, 1.0)
        assert d.alpha_k == pytest.approx(INV_SQRT2, rel=1e-15) and d.theta_k == 0.0
        d = adapbb_step(0.4, 1.0, 1.0)
        assert d.alpha_k == pytest.approx(0.4 / SQRT2, rel=1e-15) and d.theta_k == 0.0


class TestBaselines:
    def test_adgd(self):
        d = baseline_step(ControllerKind(Method.ADGD), 1.0, 1.0, 1.0, 1.0, 1.0)
        assert d.alpha_k == pytest.approx(INV_SQRT2, rel=1e-15)

    def test_adgd2(self):
        d = baseline_step(ControllerKind(Method.ADGD2), 1.0, 1.0, 1.0, 1.0, 1.0 / 3.0)
        assert d.alpha_k == pytest.approx(1.0, rel=1e-15)

    def test_adapgm(self):
        d = baseline_step(ControllerKind(Method.ADAPGM), 0.5, 2.0, 1.0, 1.0, 1.0)
        assert d.alpha_k == pytest.approx(INV_SQRT2, rel=1e-15)

    def test_adapgm_pi_r_positive(self):
        d = baseline_step(ControllerKind(Method.ADAPGM_PIR), 0.5, 2.0, 1.0, 1.0, 1.0)
        assert d.alpha_k > 0

    def test_fixed(self):
        d = baseline_step(ControllerKind(Method.FIXED, alpha=0.3), 1.0, 1.0, 1.0, 1.0, 1.0)
        assert d.alpha_k == 0.3
        with pytest.raises(InvalidState):
            baseline_step(ControllerKind(Method.FIXED), 1.0, 1.0, 1.0, 1.0, 1.0)

    def test_initial_theta_defaults(self):
        assert initial_theta(ControllerKind(Method.ADGD2), 1.0, 1.0) == pytest.approx(1 / 3)
        assert initial_theta(ControllerKind(Method.ADAPGM), 1.0, 1.0) == 1.0
        assert initial_theta(ControllerKind.adabb(), 2.0, 1.0) == 1.0


class TestControllerKind:
    @pytest.mark.parametrize("label,opts", [("AdaBB", (2, 2)), ("AdaBB1", (1, 1)), ("AdaBB2", (1, 2)),
                                            ("AdaBB3", (2, 1))])
    def test_variants(self, label, opts):
        k = ControllerKind.parse(label)
        assert k.method is Method.ADABB and (k.option_ii, k.option_iii) == opts and k.label == label

    def test_parameters_and_aliases(self):
        k = ControllerKind.parse("AdaBB-SC(eta=0.25, delta=1.2)")
        assert k.eta == 0.25 and k.delta == 1.2
        assert ControllerKind.parse("FixedGD").method is Method.FIXED
        with pytest.raises(ValueError):
            ControllerKind.parse("Newton")

    def test_dispatch(self):
        assert next_step(ControllerKind.parse("AdaPBB"), 0.75, 1.0, 1.0, 1.0, 1.0).theta_k == 0.0


# ---------------------------------------------------------------------------
# Option II never takes a larger step than Option I in Cases ii and iii


@given(st.floats(1e-8, 1e8), st.floats(0.0, 1e6), st.floats(0.5, 1.0, exclude_min=True, exclude_max=True))
def test_option_dominance_case_ii(ap, th, ratio):
    lam = ratio * ap
    if classify(lam, ap) is not CaseTag.CASE_II:
        return
    assert adabb_step(lam, ap, th, OPTION_II, OPTION_II).alpha_k <= adabb_step(lam, ap, th, OPTION_I, OPTION_II).alpha_k


@given(st.floats(1e-8, 1e8), st.floats(0.0, 1e6), st.floats(1e-6, 0.5))
def test_option_dominance_case_iii(ap, th, ratio):
    lam = ratio * ap
    if classify(lam, ap) is not CaseTag.CASE_III:
        return
    assert adabb_step(lam, ap, th, OPTION_II, OPTION_II).alpha_k <= adabb_step(lam, ap, th, OPTION_II, OPTION_I).alpha_k
