import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tispde import (
    AtomMeasure,
    CoefficientSet,
    F_eval,
    G_eval,
    HermiteRep,
    IdentityJump,
    InvalidInputError,
    LevyModel,
    MarkFunction,
    SeparableJump,
    SeparableTerm,
    ZeroJump,
    bar_b,
    bar_sigma,
    hypothesis_report,
)
from tispde.coefficients import bar_F, bar_G, probe_sup
from tispde.sobolev import norm_p

# <h_0, tau_1 h_0> = exp(-1/4), the Gaussian overlap
OVERLAP_1 = 0.7788007830714049


def scalar_set(N=20, sigma=1.0, b=0.0, F=None, G=None, p=1.0):
    h0 = HermiteRep.unit((0,), N, p)
    return CoefficientSet([[h0 * sigma]], [h0 * b], F, G, p)


def separable(f1, gamma_coeff=1.0, h=1.0, N=20, p=1.5):
    return SeparableJump([SeparableTerm(h, f1, [HermiteRep.unit((0,), N, p) * gamma_coeff])])


class TestBarred:
    def test_zero_xi(self):
        cs = scalar_set()
        assert np.all(bar_sigma([0.3], HermiteRep.zeros(1, 20), cs) == 0.0)

    def test_at_zero(self):
        assert_allclose(bar_sigma([0.0], HermiteRep.unit((0,), 20), scalar_set()), [[1.0]], atol=1e-14)

    @pytest.mark.parametrize("z", [1.0, -1.0])
    def test_gaussian_overlap(self, z):
        xi = HermiteRep.unit((0,), 20)
        assert_allclose(bar_sigma([z], xi, scalar_set()), [[OVERLAP_1]], rtol=1e-12)
        assert_allclose(bar_b([z], xi, scalar_set(sigma=0.0, b=1.0)), [OVERLAP_1], rtol=1e-12)

    @given(st.floats(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_overlap_curve(self, z):
        xi = HermiteRep.unit((0,), 40)
        assert_allclose(bar_b([z], xi, scalar_set(N=40, b=1.0)), [np.exp(-z * z / 4)], atol=1e-12)

    def test_dimension_check(self):
        with pytest.raises(InvalidInputError):
            bar_b([0.1, 0.2], HermiteRep.unit((0,), 20), scalar_set())


class TestJumpEvaluation:
    def test_zero_y(self):
        cs = scalar_set(F=separable(MarkFunction("constant")))
        assert_allclose(F_eval(HermiteRep.zeros(1, 20), [0.3], cs), [0.0])

    def test_zero_f1(self):
        cs = scalar_set(F=separable(MarkFunction("constant", {"value": 0.0})))
        assert_allclose(F_eval(HermiteRep.unit((0,), 20), [0.3], cs), [0.0])

    @pytest.mark.parametrize("x", [0.1, -0.5, 0.99])
    def test_unit_duality(self, x):
        cs = scalar_set(F=separable(MarkFunction("constant")))
        assert_allclose(F_eval(HermiteRep.unit((0,), 20), [x], cs), [1.0])

    def test_identity_variant(self):
        cs = scalar_set(F=IdentityJump(1), G=IdentityJump(1))
        y = HermiteRep.unit((3,), 20)
        assert_allclose(F_eval(y, [0.4], cs), [0.4])
        assert_allclose(G_eval(y, [-2.5], cs), [-2.5])

    @pytest.mark.parametrize("x", [0.0, 1.0, 1.5, -1.0])
    def test_small_mark_range(self, x):
        with pytest.raises(InvalidInputError):
            F_eval(HermiteRep.unit((0,), 20), [x], scalar_set(F=IdentityJump(1)))

    def test_large_mark_range(self):
        with pytest.raises(InvalidInputError):
            G_eval(HermiteRep.unit((0,), 20), [0.5], scalar_set(G=IdentityJump(1)))

    def test_g_mirrors_f(self):
        cs = scalar_set(G=SeparableJump([SeparableTerm(2.0, MarkFunction("constant"), [HermiteRep.unit((0,), 20)])]))
        assert_allclose(G_eval(HermiteRep.unit((0,), 20), [3.0], cs), [2.0])
        assert_allclose(G_eval(HermiteRep.zeros(1, 20), [3.0], cs), [0.0])

    def test_barred_jump(self):
        cs = scalar_set(F=separable(MarkFunction("constant")), G=IdentityJump(1))
        xi = HermiteRep.unit((0,), 20)
        assert_allclose(bar_F([1.0], [0.5], xi, cs), [OVERLAP_1], rtol=1e-12)
        assert_allclose(bar_G([1.0], [2.0], xi, cs), [2.0])

    def test_values_and_integral_consistent(self, rng):
        F = SeparableJump([
            SeparableTerm(0.5, MarkFunction("power", {"exponent": 2.0}), [HermiteRep.unit((1,), 10)]),
            SeparableTerm(-1.0, MarkFunction("component", {"index": 0}), [HermiteRep.unit((0,), 10)]),
        ])
        y = HermiteRep(1, 10, rng.standard_normal(11))
        nu = AtomMeasure([[0.2], [-0.7]], [1.5, 0.5])
        vals = F.values(y, nu.points)
        assert_allclose(vals, np.stack([F(y, x) for x in nu.points]))
        assert_allclose(F.integral(y, nu), nu.rates @ vals)

    def test_mark_function_roundtrip(self):
        f = MarkFunction("boundary_power", {"exponent": 2.0, "scale": 0.5})
        assert MarkFunction.from_dict(f.to_dict()) == f
        assert_allclose(f([0.5]), 0.5 / 0.25)

    def test_unknown_mark_kind(self):
        with pytest.raises(InvalidInputError):
            MarkFunction("sine")

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(InvalidInputError):
            CoefficientSet([[HermiteRep.unit((0,), 5)]], [HermiteRep.unit((0,), 6)])


class TestLipschitzCertificate:
    @given(st.floats(0.05, 0.95), st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_bound_holds(self, x, seed):
        p = 1.0
        rng = np.random.default_rng(seed)
        gam = HermiteRep(1, 12, rng.standard_normal(13), p + 0.5)
        F = SeparableJump([SeparableTerm(1.3, MarkFunction("power", {"exponent": -1.0}), [gam])])
        y1 = HermiteRep(1, 12, rng.standard_normal(13))
        y2 = HermiteRep(1, 12, rng.standard_normal(13))
        lhs = np.linalg.norm(F(y1, [x]) - F(y2, [x]))
        rhs = F.lipschitz_constant([x], p + 0.5) * norm_p(y1 - y2, -(p + 0.5))
        assert lhs <= rhs * (1 + 1e-12)


class TestHypothesisReport:
    def test_zero_F(self):
        cs = scalar_set(F=ZeroJump(1))
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 20)], LevyModel(1, AtomMeasure([[0.5]], [1.0])))
        for k in ("F1", "F2", "F3"):
            assert rep["hypotheses"][k]["ok"]
        assert rep["hypotheses"]["F2"]["sup_Cx_on_support"] == 0.0
        assert rep["hypotheses"]["F2"]["int_Cx2_nu"] == 0.0

    def test_inverse_mark_single_atom(self):
        # C_x = |f1(x)| ||gamma||_{p+1/2} = 2 at the atom; int C_x^2 dnu = 4
        cs = scalar_set(F=separable(MarkFunction("power", {"exponent": -1.0})))
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 20)], LevyModel(1, AtomMeasure([[0.5]], [1.0])))
        F2 = rep["hypotheses"]["F2"]
        lip = norm_p(HermiteRep.unit((0,), 20), 1.5)
        assert_allclose(F2["sup_Cx_on_support"], 2.0 * lip)
        assert_allclose(F2["int_Cx2_nu"], 4.0 * lip ** 2)
        # 1/|x| is unbounded on the ball, which the sup over |x| < 1 catches
        assert not F2["ok"] and "F2" in rep["violations"]

    def test_separable_passes(self):
        cs = scalar_set(
            sigma=0.5,
            b=0.3,
            F=separable(MarkFunction("constant", {"value": 0.8})),
            G=SeparableJump([SeparableTerm(1.0, MarkFunction("constant"), [HermiteRep.unit((1,), 20, 1.0)])]),
        )
        nu = LevyModel(1, AtomMeasure([[0.5], [-0.3]], [1.0, 2.0]), AtomMeasure([[1.5]], [0.5]))
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 20, -1.0)], nu)
        assert rep["ok"], rep["violations"]

    def test_boundary_blowup_flagged(self):
        cs = scalar_set(F=separable(MarkFunction("boundary_power", {"exponent": 1.0})))
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 20)], LevyModel(1, AtomMeasure([[0.999]], [1.0])))
        assert "F2" in rep["violations"]
        assert not rep["ok"]

    def test_identity_G_has_no_uniform_bound(self):
        cs = scalar_set(G=IdentityJump(1))
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 20)], LevyModel(1, None, AtomMeasure([[2.0]], [1.0])))
        assert rep["violations"] == ["G2"]

    def test_loc_lip_gaussian_slope(self):
        # b_bar(z) = exp(-z^2/4), max slope (sqrt 2 / 2) e^{-1/2}
        cs = scalar_set(N=30, sigma=0.0, b=1.0)
        rep = hypothesis_report(cs, [HermiteRep.unit((0,), 30)], LevyModel.zero(1), loc_lip_n=(2,),
                                grid_points=2001)
        assert_allclose(rep["hypotheses"]["loc_Lip"]["by_n"]["2"]["b"], np.sqrt(2) / 2 * np.exp(-0.5), rtol=1e-5)

    def test_probe_sup(self):
        assert probe_sup(lambda x: 3.0, 1, "small") == (3.0, True)
        assert probe_sup(lambda x: 1.0 / np.linalg.norm(x), 1, "small")[1] is False
        assert probe_sup(lambda x: np.linalg.norm(x), 2, "large")[1] is False

    def test_truncated_density_warns(self):
        from tispde import epsilon_truncated

        nu = LevyModel(1, epsilon_truncated(lambda x: abs(x) ** -1.5, 0.05))
        rep = hypothesis_report(scalar_set(F=IdentityJump(1)), [HermiteRep.unit((0,), 20)], nu)
        assert any("truncated" in w for w in rep["warnings"])
