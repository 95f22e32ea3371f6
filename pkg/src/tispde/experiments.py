"""Config-driven Monte Carlo runs and verification suites.

Paths are independent; they are mapped over a thread pool and reduced
in path-index order, so results do not depend on the thread count.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .coefficients import hypothesis_report
from .inequalities import (
    first_order_check,
    monotonicity_check,
    spl_mono_check,
    taylor_jump_check,
    translation_bound_fit,
)
from .levy import generate_noise, grid_times
from .sde import solve_sde, solve_sde_interlaced
from .sobolev import HermiteRep
from .spde import (
    ito_residual,
    jump_identity_gap,
    reconstruct_Z,
    residual_statistics,
    translate_solution,
    uniqueness_gap,
    weak_residual,
)


def pmap(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _labels(tests):
    return ["h" + "_".join(str(k) for k in n) for n, _ in tests]


def run_path(cfg, i, noise=None):
    """Noise, trajectory and Y-path for path ``i`` of the config."""
    if noise is None:
        noise = generate_noise(cfg.model, cfg.T, cfg.dt, cfg.seed, i)
    traj = solve_sde(cfg.cset, cfg.xi, cfg.kappa, noise, cfg.model.small, cfg.m, cfg.Q)
    return noise, traj, translate_solution(traj, cfg.xi, cfg.Q)


def simulate(cfg, threads=1):
    """All paths plus the weak-residual statistics on the base grid."""
    tests = cfg.test_functions()
    labels = _labels(tests)
    reps = [phi for _, phi in tests]

    def one(i):
        noise, traj, path = run_path(cfg, i)
        res = weak_residual(path, cfg.cset, noise, cfg.model.small, reps, cfg.Q) if reps else None
        return noise, traj, path, res

    results = pmap(one, range(cfg.paths), threads)
    grid = grid_times(cfg.T, cfg.dt)
    series = [r[3] for r in results if r[3] is not None]
    stats = residual_statistics(grid, series, labels) if series else {}
    report = hypothesis_report(cfg.cset, [cfg.xi], cfg.model)
    summary = {
        "paths": cfg.paths,
        "survival_fraction": float(np.mean([not r[1].stopped for r in results])),
        "explosion_times": [r[1].theta for r in results],
        "tail_mass_max": float(max(float(np.max(r[2].tails)) if len(r[2].tails) else 0.0 for r in results)),
        "final_states": [r[1].states[-1].tolist() for r in results],
        "weak_residual": stats,
        "max_abs_weak_residual": float(max((np.max(np.abs(s[1])) for s in series), default=0.0)),
        "hypothesis_warnings": report["violations"],
    }
    return results, summary


def _refined_noises(cfg, i):
    levels = cfg.refinements
    fine = generate_noise(cfg.model, cfg.T, cfg.dt / 2 ** levels, cfg.seed, i)
    return [fine.coarsen(2 ** (levels - k)) for k in range(levels + 1)]


def _factors(values):
    v = np.asarray(values, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (v[:-1] / v[1:]).tolist()


def verify_correspondence(cfg, threads=1):
    def one(i):
        noise, traj, path = run_path(cfg, i)
        Z = reconstruct_Z(path, cfg.cset, noise, cfg.model.small, z0=cfg.kappa)
        gap = float(np.max(np.abs(Z - traj.states)))
        inter = solve_sde_interlaced(cfg.cset, cfg.xi, cfg.kappa, noise, cfg.model.small, cfg.m, cfg.Q)
        igap = float(np.max(np.abs(inter.states - traj.states))) if len(inter) == len(traj) else float("inf")
        jid = jump_identity_gap(path, cfg.cset, cfg.Q, cfg.tolerances["jump_identity"])
        return gap, igap, jid, bool(np.array_equal(Z, traj.states))

    out = pmap(one, range(cfg.paths), threads)
    tol = cfg.tolerances
    gap = max(o[0] for o in out)
    igap = max(o[1] for o in out)
    jgap = max(o[2]["max_gap"] for o in out)
    return {
        "suite": "correspondence",
        "max_abs_Z_minus_U": gap,
        "bitwise_equal_paths": int(sum(o[3] for o in out)),
        "max_abs_interlacing_gap": igap,
        "max_jump_identity_gap": jgap,
        "jumps_checked": int(sum(o[2]["checked"] for o in out)),
        "jumps_inconclusive": int(sum(o[2]["inconclusive"] for o in out)),
        "passed": bool(gap <= tol["correspondence"] and igap <= tol["interlacing"] and jgap <= tol["jump_identity"]),
    }


def verify_ito(cfg, threads=1):
    tests = [phi for _, phi in cfg.test_functions()]

    def one(i):
        maxima = []
        for noise in _refined_noises(cfg, i):
            traj = solve_sde(cfg.cset, cfg.xi, cfg.kappa, noise, cfg.model.small, cfg.m, cfg.Q)
            _, R = ito_residual(traj, cfg.xi, tests, cfg.Q)
            maxima.append(float(np.max(np.abs(R))))
        return maxima

    per_path = np.array(pmap(one, range(cfg.paths), threads))
    levels = per_path.max(axis=0).tolist()
    factors = _factors(levels)
    tol = cfg.tolerances
    ok = levels[0] <= tol["ito_abs"] or all(f >= tol["ito_min_factor"] for f in factors)
    return {
        "suite": "ito",
        "dt": [cfg.dt / 2 ** k for k in range(cfg.refinements + 1)],
        "max_abs_residual": levels,
        "factors": factors,
        "passed": bool(ok),
    }


def verify_weak(cfg, threads=1):
    tests = [phi for _, phi in cfg.test_functions()]

    def one(i):
        rows = []
        for noise in _refined_noises(cfg, i):
            traj = solve_sde(cfg.cset, cfg.xi, cfg.kappa, noise, cfg.model.small, cfg.m, cfg.Q)
            path = translate_solution(traj, cfg.xi, cfg.Q)
            _, R = weak_residual(path, cfg.cset, noise, cfg.model.small, tests, cfg.Q)
            rows.append(np.max(np.abs(R), axis=0))
        return np.array(rows)

    per_path = np.array(pmap(one, range(cfg.paths), threads))  # (paths, levels, tests)
    rms = np.sqrt(np.mean(per_path ** 2, axis=0))  # (levels, tests)
    factors = [_factors(rms[:, j]) for j in range(rms.shape[1])]
    ok = float(np.max(rms[0])) <= cfg.tolerances["weak_abs"] or all(
        f >= cfg.tolerances["weak_min_factor"] for fs in factors for f in fs
    )
    return {
        "suite": "weak",
        "dt": [cfg.dt / 2 ** k for k in range(cfg.refinements + 1)],
        "rms_max_residual": rms.tolist(),
        "factors": factors,
        "passed": bool(ok),
    }


def verify_uniqueness(cfg, threads=1):
    def one(i):
        return [translate_solution(solve_sde(cfg.cset, cfg.xi, cfg.kappa, nz, cfg.model.small, cfg.m, cfg.Q),
                                   cfg.xi, cfg.Q) for nz in _refined_noises(cfg, i)]

    paths = pmap(one, range(cfg.paths), threads)
    grid = grid_times(cfg.T, cfg.dt)
    gaps, survival = [], []
    for k in range(cfg.refinements):
        mean, alive = uniqueness_gap([p[k] for p in paths], [p[k + 1] for p in paths], grid, cfg.p)
        gaps.append(float(np.nanmax(mean)) if np.any(np.isfinite(mean)) else 0.0)
        survival.append(float(np.min(alive)))
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:])) or max(gaps) == 0.0
    return {
        "suite": "uniqueness",
        "dt_pairs": [[cfg.dt / 2 ** k, cfg.dt / 2 ** (k + 1)] for k in range(cfg.refinements)],
        "sup_mean_gap": gaps,
        "min_survival": survival,
        "passed": bool(decreasing),
    }


SUITES = {
    "correspondence": verify_correspondence,
    "ito": verify_ito,
    "weak": verify_weak,
    "uniqueness": verify_uniqueness,
}


def run_inequalities(cfg):
    """Inequality reports; parameters come from the config's ``inequalities`` section."""
    spec = cfg.inequalities
    d, p = cfg.d, cfg.p
    levels = tuple(spec.get("levels", (20, 30, 40)))
    samples = int(spec.get("samples", 1000))
    seed = int(spec.get("seed", cfg.seed))
    N = int(spec.get("N", levels[-1]))
    sigma = np.asarray(spec.get("sigma", np.eye(d).tolist()), dtype=np.float64)
    b = np.asarray(spec.get("b", [0.0] * d), dtype=np.float64)
    reports = [
        monotonicity_check(p, sigma, b, samples=samples, N=N, levels=levels, seed=seed),
        spl_mono_check(p, samples=samples, N=N, d=d, levels=levels, seed=seed, alphas=int(spec.get("alphas", 8))),
        first_order_check(p, samples=samples, N=N, d=d, seed=seed),
    ]
    for z in spec.get("taylor_z", [[0.3] * d]):
        psi = HermiteRep.unit((0,) * d, min(N, 10))
        reports.append(taylor_jump_check(p, z, psi))
    if spec.get("translation", True):
        reports.append(translation_bound_fit(p, N=int(spec.get("translation_N", 40 if d == 1 else 16)), d=d,
                                             n=int(spec.get("lipschitz_n", 2)), seed=seed))
    return [r.to_dict() for r in reports]
