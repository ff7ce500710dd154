import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfglab.model import (
    Box,
    ModelError,
    ProblemSpec,
    SamplerConfig,
    affine,
    builtin_catalog,
    builtin_field,
    polynomial,
    zero_field,
)
from mfglab.monotone import (
    MonotonicityReport,
    check_alpha_monotone,
    check_alpha_monotone_differential,
    check_g_monotonicity,
    check_hyp_autonomous,
    check_hyp_coupled,
    check_trade_condition,
    check_volatility_condition,
    check_weaker_monotonicity,
    report_to_text,
    save_report,
    search_matrix_A,
)

AM = builtin_catalog("autonomous_monotone")


def samp(n=512, seed=0, **kw):
    return SamplerConfig(n_samples=n, seed=seed, **kw)


def xsamp(n=512, seed=0, **kw):
    kw.setdefault("x_box", Box([-1.0], [1.0]))
    return SamplerConfig(n_samples=n, seed=seed, **kw)


def am_variant(**overrides):
    """autonomous_monotone (F=u, G=x, b=p, U0=x) with swapped coefficients."""
    return dataclasses.replace(AM, name="variant", **overrides)


class TestAlphaMonotone:
    def test_identity_is_tight_at_alpha_one(self):
        r = check_alpha_monotone(affine(1, 1, 1, x=[[1.0]]), 1.0, xsamp())
        assert r.passed and r.margin == 0.0
        assert r.hypothesis == "alpha_monotone"

    def test_doubling_threshold_at_half(self):
        f = affine(1, 1, 1, x=[[2.0]])
        assert check_alpha_monotone(f, 0.5, xsamp()).margin == 0.0
        assert not check_alpha_monotone(f, 0.6, xsamp()).passed

    def test_sign_flip_margin_formula_at_witness(self):
        # f = -x violates by exactly (1 + alpha)|x - y|^2
        r = check_alpha_monotone(affine(1, 1, 1, x=[[-1.0]]), 0.5, xsamp())
        assert not r.passed
        dx = r.witness[0] - r.witness[1]
        assert r.margin == pytest.approx(-(1.0 + 0.5) * float(dx @ dx), abs=1e-12)

    def test_pairs_share_p(self):
        # f(x,p) = x + p is alpha-monotone at 1 only if p never differs
        f = affine(1, 1, 1, x=[[1.0]], p=[[1.0]])
        r = check_alpha_monotone(f, 1.0, xsamp(p_box=Box([-1.0], [1.0])))
        assert r.passed and r.margin == 0.0

    def test_u_reading_field_rejected(self):
        with pytest.raises(ModelError, match="alpha-monotonicity"):
            check_alpha_monotone(affine(1, 1, 1, u=[[1.0]]), 1.0, xsamp())

    def test_missing_x_box_rejected(self):
        with pytest.raises(ModelError, match="x_box"):
            check_alpha_monotone(affine(1, 1, 1, x=[[1.0]]), 1.0, samp())

    def test_deterministic(self):
        f = affine(1, 1, 1, x=[[-1.0]])
        a = check_alpha_monotone(f, 0.3, xsamp())
        b = check_alpha_monotone(f, 0.3, xsamp())
        assert a.margin == b.margin
        assert all(np.array_equal(wa, wb) for wa, wb in zip(a.witness, b.witness))


# smooth catalog shared by the difference-form and derivative-form checks;
# cubic-plus-identity has slopes in [1,4] so the threshold sits at 1/4
_SMOOTH_CATALOG = [
    (affine(1, 1, 1, x=[[1.0]]), 1.0, True),
    (affine(1, 1, 1, x=[[2.0]]), 0.5, True),
    (affine(1, 1, 1, x=[[2.0]]), 0.6, False),
    (affine(1, 1, 1, x=[[-1.0]]), 0.5, False),
    (polynomial(1, 1, 1, [((1, 0, 0), 1.0), ((3, 0, 0), 1.0)]), 0.2, True),
    (polynomial(1, 1, 1, [((1, 0, 0), 1.0), ((3, 0, 0), 1.0)]), 0.5, False),
]
_ROT = [[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]]
_SMOOTH_CATALOG += [
    (affine(2, 2, 1, x=_ROT), 0.4, True),   # rotation: threshold cos(pi/3)
    (affine(2, 2, 1, x=_ROT), 0.6, False),
]


class TestDifferentialForm:
    @pytest.mark.parametrize("f,alpha,expect", _SMOOTH_CATALOG)
    def test_agrees_with_difference_form(self, f, alpha, expect):
        box = Box([-1.0] * f.out_shape[0], [1.0] * f.out_shape[0])
        sm = SamplerConfig(n_samples=512, seed=0, x_box=box)
        assert check_alpha_monotone(f, alpha, sm).passed is expect
        assert check_alpha_monotone_differential(f, alpha, sm).passed is expect

    def test_rotation_margin_value(self):
        # xi.R xi = cos(pi/3) for unit xi, |R xi| = 1
        sm = SamplerConfig(n_samples=64, seed=1, x_box=Box([-1.0, -1.0], [1.0, 1.0]))
        r = check_alpha_monotone_differential(affine(2, 2, 1, x=_ROT), 0.4, sm)
        assert r.margin == pytest.approx(0.1, abs=1e-4)


class TestHypAutonomous:
    def test_builtin_is_tight(self):
        r = check_hyp_autonomous(AM, 1.0, samp())
        assert r.passed and r.margin == 0.0

    def test_g_sign_flip_fails(self):
        bad = am_variant(g_coef=affine(1, 1, 1, x=[[-1.0]]))
        r = check_hyp_autonomous(bad, 1.0, samp())
        assert not r.passed and r.margin < -0.01

    def test_state_dependent_b_redirects(self):
        gp = builtin_catalog("geometric_price", 1.0, 0.05)
        with pytest.raises(ModelError, match="check_hyp_coupled"):
            check_hyp_autonomous(gp, 1.0, samp())

    def test_witness_reproduces_margin(self):
        bad = am_variant(g_coef=affine(1, 1, 1, x=[[-1.0]]))
        r = check_hyp_autonomous(bad, 1.0, samp())
        again = check_hyp_autonomous(bad, 1.0, samp(), tuples=[r.witness])
        assert abs(again.margin - r.margin) <= 1e-12


class TestHypCoupled:
    def test_linear_case_with_half_identity(self):
        # <b-diff, 2A(p-q)> = |p-q|^2 closes the budget exactly
        r = check_hyp_coupled(AM, [[0.5]], 1.0, samp())
        assert r.passed and r.margin == 0.0
        assert np.array_equal(r.a_matrix, [[0.5]])

    def test_negative_b_fails(self):
        bad = am_variant(b_coef=affine(1, 1, 1, p=[[-1.0]]))
        r = check_hyp_coupled(bad, [[1.0]], 1.0, samp())
        assert not r.passed
        again = check_hyp_coupled(bad, [[1.0]], 1.0, samp(), tuples=[r.witness])
        assert abs(again.margin - r.margin) <= 1e-12

    def test_non_symmetric_a_rejected(self):
        two = dataclasses.replace(
            AM, m=2, p_box=Box([-1.0, -1.0], [1.0, 1.0]),
            b_coef=affine(2, 1, 2, p=np.eye(2)), name="m2")
        with pytest.raises(ModelError, match="symmetric"):
            check_hyp_coupled(two, [[0.0, 1.0], [0.0, 0.0]], 1.0, samp())

    def test_indefinite_a_rejected(self):
        with pytest.raises(ModelError, match="semidefinite"):
            check_hyp_coupled(AM, [[-1.0]], 1.0, samp())

    def test_geometric_price_with_searched_a(self):
        gp = builtin_catalog("geometric_price", 1.0, 0.05)
        sm = samp(n=2048, include_grid_pairs=False)
        found = search_matrix_A(gp, 0.5, sm, force_coupled=True)
        assert found is not None
        a_mat, margin = found
        assert margin >= 0.0
        rep = check_hyp_coupled(gp, a_mat, 0.5, sm)
        assert rep.passed and rep.margin > 0.0

    def test_scaling_covariance_power_of_two(self):
        # with U0 = F = G = 0 both margins are linear in c, and c = 2
        # rescales every float exactly
        sc = am_variant(f_coef=zero_field(1, 1, 1), g_coef=zero_field(1, 1, 1),
                        b_coef=affine(1, 1, 1, x=[[0.3]], p=[[0.7]], u=[[-0.2]]),
                        u0=zero_field(1, 1, 1))
        base = check_hyp_coupled(sc, [[0.5]], 0.3, samp(n=256)).margin
        doubled = check_hyp_coupled(sc, [[1.0]], 0.6, samp(n=256)).margin
        assert doubled == 2.0 * base
        tripled = check_hyp_coupled(sc, [[1.5]], 0.9, samp(n=256)).margin
        assert tripled == pytest.approx(3.0 * base, rel=1e-12)

    @given(bx=st.floats(-2, 2), bp=st.floats(-2, 2), bu=st.floats(-2, 2),
           a=st.floats(0.01, 4), alpha=st.floats(0.01, 2))
    @settings(max_examples=25, deadline=None)
    def test_scaling_covariance_property(self, bx, bp, bu, a, alpha):
        sc = am_variant(f_coef=zero_field(1, 1, 1), g_coef=zero_field(1, 1, 1),
                        b_coef=affine(1, 1, 1, x=[[bx]], p=[[bp]], u=[[bu]]),
                        u0=zero_field(1, 1, 1))
        base = check_hyp_coupled(sc, [[a]], alpha, samp(n=64)).margin
        doubled = check_hyp_coupled(sc, [[2.0 * a]], 2.0 * alpha, samp(n=64)).margin
        assert doubled == 2.0 * base


class TestWeakerMonotonicity:
    def test_degenerate_g_passes_any_alpha(self):
        # G = 0 kills the RHS and constant U0 kills the alpha term in the
        # datum condition, so the level is arbitrary
        dg = am_variant(g_coef=zero_field(1, 1, 1), u0=zero_field(1, 1, 1))
        for alpha in (0.5, 1.0, 7.25):
            r = check_weaker_monotonicity(dg, [[0.5]], alpha, samp(n=256))
            assert r.passed, alpha

    def test_autonomous_embedding(self):
        r = check_weaker_monotonicity(AM, [[0.5]], 1.0, samp())
        assert r.passed and r.margin == 0.0

    def test_holds_at_reduced_level(self):
        # a coupled pass at alpha implies the weakened form at
        # alpha / (1 + |DxG|^2 + |DpG|^2); here G = x gives 1/2
        assert check_hyp_coupled(AM, [[0.5]], 1.0, samp()).passed
        r = check_weaker_monotonicity(AM, [[0.5]], 0.5, samp())
        assert r.passed


class TestGMonotonicity:
    def test_identity_stack_on_builtin(self):
        r = check_g_monotonicity(AM, [[1.0]], [[0.0]], 1.0, samp())
        assert r.passed and r.margin == 0.0

    def test_value_coupling_needs_f_not_g(self):
        # coercivity in u enters through Gamma(F,b), so F = u with G = 0
        # is the tight case; putting u into G instead leaves the second
        # condition indefinite
        good = am_variant(g_coef=zero_field(1, 1, 1), b_coef=zero_field(1, 1, 1))
        r = check_g_monotonicity(good, [[1.0]], [[0.0]], 1.0, samp())
        assert r.passed and r.margin == 0.0
        bad = am_variant(f_coef=zero_field(1, 1, 1), b_coef=zero_field(1, 1, 1),
                         g_coef=affine(1, 1, 1, u=[[1.0]]))
        assert not check_g_monotonicity(bad, [[1.0]], [[0.0]], 1.0, samp()).passed

    def test_linear_toy_fails_with_witness(self):
        lt = builtin_catalog("linear_toy", 0.0, 0.0, 1.0)
        r = check_g_monotonicity(lt, [[1.0]], [[0.0]], 1.0, samp())
        assert not r.passed
        again = check_g_monotonicity(lt, [[1.0]], [[0.0]], 1.0, samp(),
                                     tuples=[r.witness])
        assert abs(again.margin - r.margin) <= 1e-12

    def test_shape_validation(self):
        with pytest.raises(ModelError, match="N must be"):
            check_g_monotonicity(AM, [[1.0, 0.0]], [[0.0]], 1.0, samp())
        with pytest.raises(ModelError, match="M must be"):
            check_g_monotonicity(AM, [[1.0]], [[0.0, 0.0]], 1.0, samp())


class TestVolatilityCondition:
    def _with_sigma(self, coef):
        return dataclasses.replace(AM, sigma=0.1, volatility=coef, name="vol")

    def test_absent_volatility_rejected(self):
        with pytest.raises(ModelError, match="volatility"):
            check_volatility_condition(AM, [[0.5]], 1.0, samp())

    def test_constant_sigma_reduces_to_coupled(self):
        const = affine(1, 1, 1, const=[0.3], out_shape=(1, 1))
        zero = zero_field(1, 1, 1, out_shape=(1, 1))
        a = check_volatility_condition(self._with_sigma(const), [[0.5]], 1.0, samp())
        b = check_volatility_condition(self._with_sigma(zero), [[0.5]], 1.0, samp())
        assert a.passed and a.margin == b.margin

    def test_epsilon_threshold_matches_analysis(self):
        # Sigma = eps x against the linear base at alpha = 1/2: the x-only
        # pairs make the cutoff exactly sqrt(1/2)
        def passes(eps):
            sig = affine(1, 1, 1, x=[[eps]], out_shape=(1, 1))
            rep = check_volatility_condition(self._with_sigma(sig), [[0.5]],
                                             0.5, samp(n=256))
            return rep.passed

        assert passes(0.70) and not passes(0.72)
        lo, hi = 0.0, 2.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if passes(mid) else (lo, mid)
        # the pass tolerance of -1e-9 nudges the cutoff by a few 1e-9
        assert lo == pytest.approx(np.sqrt(0.5), abs=1e-7)

    def test_a_zero_drops_trace_term(self):
        lin = affine(1, 1, 1, p=[[0.8]], out_shape=(1, 1))
        zero = zero_field(1, 1, 1, out_shape=(1, 1))
        a = check_volatility_condition(self._with_sigma(lin), [[0.0]], 0.5, samp())
        b = check_volatility_condition(self._with_sigma(zero), [[0.0]], 0.5, samp())
        assert a.margin == b.margin


class TestTradeCondition:
    def test_linear_identity_case(self):
        r = check_trade_condition(AM, [[0.5]], 1.0, samp())
        assert r.passed and r.margin == 0.0

    def test_value_coupled_g_fails(self):
        # G = x + u with F = b = 0: nothing supplies the |u-v|^2 coercivity
        tr = am_variant(f_coef=zero_field(1, 1, 1), b_coef=zero_field(1, 1, 1),
                        g_coef=affine(1, 1, 1, x=[[1.0]], u=[[1.0]]))
        r = check_trade_condition(tr, [[0.0]], 1.0, samp())
        assert not r.passed and r.margin < -0.05
        again = check_trade_condition(tr, [[0.0]], 1.0, samp(), tuples=[r.witness])
        assert abs(again.margin - r.margin) <= 1e-12

    def test_merely_monotone_datum_passes_trade(self):
        # cube-root datum: merely monotone, so the datum side of the trade
        # holds with A = 0 while fixed-level alpha-monotonicity fails for
        # every alpha once pairs near the origin are sampled
        cb = am_variant(u0=builtin_field("cbrt", 1, 1),
                        omega=Box([-1.0], [1.0]))
        r = check_trade_condition(cb, [[0.0]], 1.0, samp())
        assert r.passed and r.margin == 0.0
        fine = xsamp(grid_nodes=201)
        for alpha in np.linspace(0.1, 1.0, 10):
            rep = check_alpha_monotone(builtin_field("cbrt", 1, 1), alpha, fine)
            assert not rep.passed, alpha


class TestSearchMatrixA:
    def test_autonomous_reduction_returns_zero(self):
        found = search_matrix_A(AM, 1.0, samp())
        assert found is not None
        a_mat, margin = found
        assert np.array_equal(a_mat, np.zeros((1, 1))) and margin == 0.0

    def test_forced_search_finds_half(self):
        found = search_matrix_A(AM, 1.0, samp(), force_coupled=True)
        assert found is not None
        a_mat, margin = found
        assert a_mat[0, 0] == 0.5 and margin >= -1e-9

    def test_negative_b_has_no_certificate(self):
        bad = am_variant(b_coef=affine(1, 1, 1, p=[[-1.0]]))
        assert search_matrix_A(bad, 1.0, samp(), force_coupled=True) is None

    def test_full_symmetric_flag(self):
        two = dataclasses.replace(
            AM, m=2, p_box=Box([-1.0, -1.0], [1.0, 1.0]),
            b_coef=affine(2, 1, 2, p=[[2.0, 1.0], [1.0, 2.0]]), name="m2")
        found = search_matrix_A(two, 1.0, samp(n=256), budget=2048,
                                force_coupled=True, full_symmetric=True)
        assert found is not None
        a_mat, margin = found
        assert np.allclose(a_mat, a_mat.T)
        assert np.linalg.eigvalsh(a_mat).min() >= 0.0
        assert check_hyp_coupled(two, a_mat, 1.0, samp(n=256)).passed


class TestReportPlumbing:
    def test_invariant_enforced(self):
        with pytest.raises(ModelError, match="inconsistent"):
            MonotonicityReport(hypothesis="x", passed=True, margin=-1.0,
                               alpha_used=1.0, a_matrix=None,
                               witness=(None,) * 6, n_samples=1, seed=0)

    def test_text_round_trip_fields(self):
        r = check_hyp_coupled(AM, [[0.5]], 1.0, samp(n=64))
        text = report_to_text(r)
        for key in ("hypothesis:", "passed:", "margin:", "alpha:", "a_matrix:",
                    "witness_x:", "witness_v:", "notes:"):
            assert key in text
        assert "hyp_coupled" in text

    def test_save_is_byte_stable(self, tmp_path):
        r = check_hyp_autonomous(AM, 1.0, samp(n=64))
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_report(r, p1)
        save_report(r, p2)
        assert p1.read_bytes() == p2.read_bytes()
