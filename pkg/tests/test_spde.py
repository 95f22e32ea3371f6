import numpy as np
import pytest
from numpy.testing import assert_allclose

from tispde import (
    AtomMeasure,
    CoefficientSet,
    HermiteRep,
    IdentityJump,
    InvalidInputError,
    LevyModel,
    MarkFunction,
    SeparableJump,
    SeparableTerm,
    Trajectory,
    generate_noise,
    ito_residual,
    reconstruct_Z,
    solve_sde,
    translate,
    translate_solution,
    uniqueness_gap,
    weak_residual,
)
from tispde.hermite import basis
from tispde.levy import grid_times
from tispde.spde import jump_identity_gap, residual_statistics
from tispde.sobolev import norm_p

N = 40
XI = HermiteRep.unit((0,), N)
TESTS = [HermiteRep.unit((j,), N) for j in range(6)]
# U' = exp(-U^2/4), U(0) = 0, at t = 1 (scipy solve_ivp, rtol 1e-13)
ODE_U1 = 0.928701535149059


def h0(scale=1.0):
    return XI * scale


def cset(sigma=0.0, b=0.0, F=None, G=None):
    return CoefficientSet([[h0(sigma)]], [h0(b)], F, G, p=1.0)


def full_set():
    F = SeparableJump([SeparableTerm(1.0, MarkFunction("constant", {"value": 0.6}), [h0()])])
    G = SeparableJump([SeparableTerm(0.5, MarkFunction("component", {"index": 0}), [HermiteRep.unit((1,), N)])])
    return cset(0.5, 0.3, F, G)


FULL = LevyModel(1, AtomMeasure([[0.5], [-0.3]], [2.0, 1.0]), AtomMeasure([[1.5], [-2.0]], [1.0, 0.5]))
EX3 = LevyModel(1, AtomMeasure([[0.5]], [2.0]))
PURE_JUMP = LevyModel(1, None, AtomMeasure([[1.5], [-2.0]], [1.0, 1.0]))


def pipeline(cs, model, seed, dt=0.05, T=1.0, kappa=None):
    nz = generate_noise(model, T, dt, seed)
    tr = solve_sde(cs, XI, kappa, nz, model.small)
    return nz, tr, translate_solution(tr, XI)


class TestTranslateSolution:
    def test_zero_driver(self):
        tr = Trajectory.from_path([0.0, 0.5, 1.0], np.zeros(3))
        path = translate_solution(tr, XI)
        assert np.all(path.coeffs == XI.coeffs)

    def test_constant_kappa(self):
        nz, tr, path = pipeline(CoefficientSet.zero(1, N), FULL, 0, kappa=[0.8])
        target = translate(XI, [0.8]).coeffs
        assert all(np.array_equal(row, target) for row in path.coeffs)

    def test_linear_driver_overlap(self):
        t = np.linspace(0, 2, 21)
        path = translate_solution(Trajectory.from_path(t, t), XI)
        assert_allclose(path.coeffs[:, 0], np.exp(-t * t / 4), atol=1e-13)

    def test_tails_recorded(self):
        _, tr, path = pipeline(full_set(), FULL, 1)
        assert len(path.tails) == len(path.times) == len(tr)
        assert np.all(path.tails < 1e-6)

    def test_stopped_row_excluded(self):
        nz = generate_noise(LevyModel(1), 5.0, 0.1, 0)
        tr = solve_sde(cset(b=10.0), XI, None, nz, AtomMeasure.empty(1), m=1.0)
        path = translate_solution(tr, XI)
        assert tr.stopped and len(path.times) == len(tr) - 1
        assert path.stopped and path.theta == tr.theta
        with pytest.raises(InvalidInputError):
            path.restrict_to([tr.theta])
        path.restrict_to([0.0, tr.theta / 2])


class TestReconstructZ:
    def test_zero_set(self):
        nz, tr, path = pipeline(CoefficientSet.zero(1, N), FULL, 2)
        assert np.all(reconstruct_Z(path, CoefficientSet.zero(1, N), nz, FULL.small) == 0.0)

    def test_riemann_sum(self):
        model = LevyModel(1)
        for dt in (0.02, 0.01):
            nz, tr, path = pipeline(cset(b=1.0), model, 0, dt=dt)
            Z = reconstruct_Z(path, cset(b=1.0), nz, model.small)
            riemann = np.concatenate([[0.0], np.cumsum(path.coeffs[:-1, 0] * dt)])
            assert_allclose(Z[:, 0], riemann, rtol=1e-12, atol=1e-15)
            assert abs(Z[-1, 0] - ODE_U1) < dt

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("which", ["full", "ex3", "pure_jump"])
    def test_bitwise(self, seed, which):
        cs, model = {
            "full": (full_set(), FULL),
            "ex3": (cset(F=IdentityJump(1)), EX3),
            "pure_jump": (cset(G=IdentityJump(1)), PURE_JUMP),
        }[which]
        nz, tr, path = pipeline(cs, model, seed)
        assert np.array_equal(reconstruct_Z(path, cs, nz, model.small), tr.states)

    def test_nonzero_kappa_with_start(self):
        nz, tr, path = pipeline(full_set(), FULL, 3, kappa=[0.4])
        assert np.array_equal(reconstruct_Z(path, full_set(), nz, FULL.small, z0=[0.4]), tr.states)

    def test_noise_mismatch(self):
        nz, tr, path = pipeline(full_set(), FULL, 3)
        other = generate_noise(FULL, 1.0, 0.05, 4)
        with pytest.raises(InvalidInputError):
            reconstruct_Z(path, full_set(), other, FULL.small)


class TestWeakResidual:
    def test_zero_set_exact(self):
        nz, tr, path = pipeline(CoefficientSet.zero(1, N), FULL, 5)
        _, R = weak_residual(path, CoefficientSet.zero(1, N), nz, FULL.small, TESTS)
        assert np.all(R == 0.0)

    def test_headroom(self):
        nz, tr, path = pipeline(full_set(), FULL, 5)
        with pytest.raises(InvalidInputError):
            weak_residual(path, full_set(), nz, FULL.small, [HermiteRep.unit((N - 1,), N)])

    def test_pure_jump_is_exact(self):
        cs = cset(G=IdentityJump(1))
        nz, tr, path = pipeline(cs, PURE_JUMP, 6, T=2.0)
        _, R = weak_residual(path, cs, nz, PURE_JUMP.small, TESTS)
        assert np.max(np.abs(R)) < 1e-12

    def test_drift_first_order(self):
        model = LevyModel(1)
        maxima = []
        for dt in (0.04, 0.02, 0.01):
            nz, tr, path = pipeline(cset(b=1.0), model, 0, dt=dt)
            _, R = weak_residual(path, cset(b=1.0), nz, model.small, TESTS)
            maxima.append(np.max(np.abs(R)))
        ratios = np.array(maxima[:-1]) / np.array(maxima[1:])
        assert np.all((ratios > 1.7) & (ratios < 2.3)), ratios

    def test_small_jump_example_decays(self):
        cs = cset(F=IdentityJump(1))
        rms = []
        fine_dt = 0.1 / 8
        for level in (1, 2, 4, 8):
            per_path = []
            for seed in range(20):
                nz = generate_noise(EX3, 1.0, fine_dt, seed).coarsen(8 // level)
                tr = solve_sde(cs, XI, None, nz, EX3.small)
                path = translate_solution(tr, XI)
                _, R = weak_residual(path, cs, nz, EX3.small, TESTS)
                per_path.append(np.max(np.abs(R), axis=0))
            rms.append(np.sqrt(np.mean(np.array(per_path) ** 2, axis=0)))
        rms = np.array(rms)
        assert np.all(rms[:-1] / rms[1:] >= 1.3)


class TestItoResidual:
    def test_constant(self):
        tr = Trajectory.from_path(np.linspace(0, 1, 11), np.full(11, 0.3))
        _, R = ito_residual(tr, XI, TESTS)
        assert np.all(R == 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_pure_jump(self, seed):
        nz, tr, path = pipeline(cset(G=IdentityJump(1)), PURE_JUMP, seed, T=3.0)
        _, R = ito_residual(tr, XI, TESTS)
        assert np.max(np.abs(R)) <= 1e-8

    def test_linear_driver_first_order(self):
        maxima = []
        for K in (20, 40, 80, 160):
            t = np.linspace(0, 1, K + 1)
            _, R = ito_residual(Trajectory.from_path(t, t), XI, TESTS)
            maxima.append(np.max(np.abs(R)))
        ratios = np.array(maxima[:-1]) / np.array(maxima[1:])
        assert np.all((ratios > 1.7) & (ratios < 2.3)), ratios

    def test_headroom(self):
        tr = Trajectory.from_path([0.0, 1.0], [0.0, 1.0])
        with pytest.raises(InvalidInputError):
            ito_residual(tr, XI, [HermiteRep.unit((N,), N)])


class TestUniquenessGap:
    def test_identical(self):
        paths = [pipeline(full_set(), FULL, s)[2] for s in range(3)]
        grid = grid_times(1.0, 0.05)
        mean, alive = uniqueness_gap(paths, paths, grid, 1.0)
        assert np.all(mean == 0.0) and np.all(alive == 1.0)

    def test_against_reconstructed_translate(self):
        a, b = [], []
        for s in range(3):
            nz, tr, path = pipeline(full_set(), FULL, s)
            Z = reconstruct_Z(path, full_set(), nz, FULL.small)
            a.append(path)
            b.append(translate_solution(Trajectory(tr.times, Z, tr.kinds, tr.qv), XI))
        mean, _ = uniqueness_gap(a, b, grid_times(1.0, 0.05), 1.0)
        assert np.max(mean) <= 1e-20

    def test_refinement_trend(self):
        cs = full_set()
        gaps = []
        for level in range(3):
            A, B = [], []
            for seed in range(10):
                fine = generate_noise(FULL, 1.0, 0.1 / 8, seed)
                for store, f in ((A, 8 // 2 ** level), (B, 8 // 2 ** (level + 1))):
                    nz = fine.coarsen(f)
                    store.append(translate_solution(solve_sde(cs, XI, None, nz, FULL.small), XI))
            gaps.append(np.max(uniqueness_gap(A, B, grid_times(1.0, 0.1), 1.0)[0]))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_size_mismatch(self):
        p = pipeline(full_set(), FULL, 0)[2]
        with pytest.raises(InvalidInputError):
            uniqueness_gap([p], [p, p], [0.0], 1.0)


class TestJumpIdentity:
    def test_checked_jumps_agree(self):
        cs = cset(G=IdentityJump(1))
        nz, tr, path = pipeline(cs, LevyModel(1, None, AtomMeasure([[1.0], [-1.0]], [1.0, 1.0])), 3, T=3.0)
        rep = jump_identity_gap(path, cs)
        assert rep["checked"] > 0
        assert rep["max_gap"] <= 1e-8

    def test_truncation_marked_inconclusive(self):
        cs = cset(G=IdentityJump(1))
        tr = Trajectory.from_path([0.0, 0.0, 1.0, 1.0], [0.0, 6.0, 6.0, 12.0], kinds=["start", "large_jump", "step",
                                                                                       "large_jump"])
        rep = jump_identity_gap(translate_solution(tr, XI), cs)
        assert rep["checked"] == 1 and rep["inconclusive"] == 1


class TestStatistics:
    def test_censoring(self):
        grid = np.array([0.0, 0.5, 1.0])
        series = [
            (np.array([0.0, 0.5, 1.0]), np.array([[0.0], [1.0], [2.0]])),
            (np.array([0.0, 0.4]), np.array([[0.0], [3.0]])),
        ]
        st = residual_statistics(grid, series, ["h0"])
        assert st["survival"] == [1.0, 0.5, 0.5]
        assert st["tests"]["h0"]["max"] == [0.0, 1.0, 2.0]
        assert_allclose(st["tests"]["h0"]["mean"], [0.0, 1.0, 2.0])

    def test_norm_helper(self):
        assert_allclose(norm_p(XI, -2.0), 1.0)
        assert basis(1, N).size == N + 1
