import copy
import filecmp
import json
import os

import numpy as np
import pytest

from conftest import config_path
from tispde.cli import EXIT_CONFIG, EXIT_OK, EXIT_TOLERANCE, main
from tispde.config import ExperimentConfig, content_hash
from tispde.errors import ConfigError


def load(name):
    with open(config_path(name)) as fh:
        return json.load(fh)


def small_copy(name, paths=3, dt=None):
    raw = load(name)
    raw["noise"]["paths"] = paths
    if dt is not None:
        raw["noise"]["dt"] = dt
    return raw


def write_config(tmp_path, raw, fname="cfg.json"):
    path = tmp_path / fname
    path.write_text(json.dumps(raw))
    return str(path)


def tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            full = os.path.join(dirpath, f)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, root)] = fh.read()
    return out


MUTATIONS = [
    (lambda r: r.pop("space"), "config.space"),
    (lambda r: r["space"].update(d=0), "space.d"),
    (lambda r: r["space"].update(N=2.5), "space.N"),
    (lambda r: r["run"].update(tolerances={"bogus": 1}), "run.tolerances.bogus"),
    (lambda r: r["run"].update(m=0.0), "run.m"),
    (lambda r: (r["initial"].update(kappa=[3.0]), r["run"].update(m=1.0)), "run.m"),
    (lambda r: r["coefficients"].update(sigma=[[0, 0]]), "coefficients.sigma"),
    (lambda r: r["noise"]["small"]["atoms"][0].update(x=[1.5]), "noise.small.atoms[0].x"),
    (lambda r: r["noise"]["large"]["atoms"][0].update(x=[0.5]), "noise.large.atoms[0].x"),
    (lambda r: r["coefficients"].update(F={"kind": "weird"}), "coefficients.F.kind"),
    (lambda r: r["coefficients"]["b"].__setitem__(0, {"terms": [{"index": [99], "coeff": 1}]}),
     "coefficients.b[0]"),
    (lambda r: r["initial"].update(kappa=[1, 2]), "initial.kappa"),
    (lambda r: r["run"].update(tests=45), "run.tests"),
]


class TestConfig:
    @pytest.mark.parametrize("name", ["zero", "drift", "example3", "full", "pure_jump", "separable_2d", "violating"])
    def test_shipped_configs_parse(self, name):
        cfg = ExperimentConfig.from_file(config_path(name))
        assert cfg.d in (1, 2) and cfg.paths >= 1
        assert cfg.xi.d == cfg.d

    @pytest.mark.parametrize("mutate,path", MUTATIONS)
    def test_error_names_field(self, mutate, path):
        raw = load("full")
        mutate(raw)
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(raw)
        assert info.value.path == path

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(tmp_path / "missing.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(bad))

    def test_hash_is_key_order_free(self):
        raw = load("full")
        reordered = json.loads(json.dumps(raw, sort_keys=True))
        reordered = dict(reversed(list(reordered.items())))
        assert ExperimentConfig(raw).hash == ExperimentConfig(reordered).hash == content_hash(raw)

    def test_with_seed(self):
        cfg = ExperimentConfig(load("full"))
        other = cfg.with_seed(99)
        assert other.seed == 99 and cfg.seed == 1
        assert other.hash != cfg.hash

    def test_json_roundtrip(self):
        cfg = ExperimentConfig(load("separable_2d"))
        assert ExperimentConfig.from_json(cfg.to_json()).hash == cfg.hash

    def test_defaults(self):
        cfg = ExperimentConfig({"space": {"d": 1, "N": 10}, "initial": {"xi": {"terms": [
            {"index": [0], "coeff": 1.0}]}}})
        assert cfg.p == 0.0 and cfg.paths == 1 and cfg.m == 1e6
        assert np.array_equal(cfg.kappa, [0.0])
        assert len(cfg.test_functions()) == 6

    def test_rep_from_file(self, tmp_path):
        (tmp_path / "rep.json").write_text(json.dumps({"d": 1, "N": 40, "coeffs": [0.0, 1.0] + [0.0] * 39}))
        raw = load("zero")
        raw["initial"]["xi"] = {"kind": "file", "path": "rep.json"}
        cfg = ExperimentConfig.from_file(write_config(tmp_path, raw))
        assert cfg.xi.coeffs[1] == 1.0


class TestCli:
    def test_simulate_outputs(self, tmp_path):
        cfg = write_config(tmp_path, small_copy("full", paths=2, dt=0.1))
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        files = set(tree(out))
        for i in range(2):
            assert f"trajectories/path_{i:04d}.csv" in files
            assert f"noise/path_{i:04d}.jsonl" in files
            assert f"snapshots/path_{i:04d}.json" in files
        summary = json.loads((out / "summary.json").read_text())
        assert summary["paths"] == 2 and summary["seed"] == 1
        assert summary["config_hash"] == ExperimentConfig.from_file(cfg).hash
        head = (out / "trajectories" / "path_0000.csv").read_text().splitlines()[0]
        assert head.startswith("# config_hash=")

    def test_zero_config_constant(self, tmp_path):
        cfg = write_config(tmp_path, small_copy("zero", paths=2))
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        lines = (out / "trajectories" / "path_0001.csv").read_text().splitlines()[2:]
        assert {float(line.split(",")[1]) for line in lines} == {0.0}
        assert json.loads((out / "summary.json").read_text())["max_abs_weak_residual"] == 0.0

    def test_noise_file_reloads(self, tmp_path):
        from tispde import NoisePath

        cfg = write_config(tmp_path, small_copy("full", paths=1, dt=0.1))
        out = tmp_path / "out"
        main(["simulate", "--config", cfg, "--out", str(out)])
        text = (out / "noise" / "path_0000.jsonl").read_text()
        assert json.loads(text.splitlines()[0])["type"] == "meta"
        assert len(NoisePath.from_jsonl(text).dB) == 10

    def test_config_error_exit(self, tmp_path):
        raw = load("full")
        raw["space"]["d"] = -1
        assert main(["simulate", "--config", write_config(tmp_path, raw), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert main(["verify", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_violating_hypotheses_exit(self, tmp_path):
        out = tmp_path / "out"
        assert main(["hypotheses", "--config", config_path("violating"), "--out", str(out)]) == EXIT_TOLERANCE
        rep = json.loads((out / "hypotheses.json").read_text())
        assert rep["violations"] == ["F2"]

    def test_separable_hypotheses_exit(self, tmp_path):
        assert main(["hypotheses", "--config", config_path("separable_2d"), "--out", str(tmp_path)]) == EXIT_OK

    def test_verify_correspondence(self, tmp_path):
        cfg = write_config(tmp_path, small_copy("full", paths=3, dt=0.1))
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out), "--suite", "correspondence"]) == EXIT_OK
        rep = json.loads((out / "verify.json").read_text())["suites"]["correspondence"]
        assert rep["max_abs_Z_minus_U"] == 0.0 and rep["bitwise_equal_paths"] == 3

    def test_verify_tolerance_failure(self, tmp_path):
        raw = small_copy("drift", paths=1)
        # the drift-only residual is first order, never below an absolute 1e-300
        raw["run"]["tolerances"] = {"ito_abs": 1e-300, "ito_min_factor": 10.0}
        cfg = write_config(tmp_path, raw)
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o"), "--suite", "ito"]) == EXIT_TOLERANCE

    def test_blowup_exit(self, tmp_path):
        raw = small_copy("drift", paths=1)
        # b_bar = 1e308 * 10 * exp(-U^2/4) overflows on the first step
        raw["coefficients"]["b"] = [{"terms": [{"index": [0], "coeff": 1e308}]}]
        raw["initial"]["xi"] = {"terms": [{"index": [0], "coeff": 10.0}]}
        raw["noise"]["dt"] = 1.0
        raw["noise"]["T"] = 4.0
        raw["run"]["m"] = 1e308
        cfg = write_config(tmp_path, raw)
        with np.errstate(over="ignore", invalid="ignore"):
            code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == EXIT_TOLERANCE

    def test_inequalities_command(self, tmp_path):
        raw = small_copy("drift", paths=1)
        raw["inequalities"] = {"levels": [10, 14], "samples": 50, "translation_N": 20, "alphas": 2}
        out = tmp_path / "out"
        assert main(["inequalities", "--config", write_config(tmp_path, raw), "--out", str(out)]) == EXIT_OK
        reps = json.loads((out / "inequalities.json").read_text())["reports"]
        assert [r["id"] for r in reps] == ["monotonicity", "special_monotonicity", "first_order_identity",
                                           "taylor_jump", "translation_bounds"]

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, small_copy("full", paths=1, dt=0.1))
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "7"])
        assert json.loads((tmp_path / "a" / "summary.json").read_text())["seed"] == 7


class TestDeterminism:
    @pytest.mark.parametrize("command", ["simulate", "verify"])
    def test_threads_and_reruns(self, tmp_path, command):
        cfg = write_config(tmp_path, small_copy("full", paths=4, dt=0.1))
        runs = []
        for tag, threads in (("a", 1), ("b", 4), ("c", 4)):
            out = tmp_path / tag
            main([command, "--config", cfg, "--out", str(out), "--threads", str(threads)])
            runs.append(tree(out))
        assert runs[0] and runs[0] == runs[1] == runs[2]

    def test_different_seed_differs(self, tmp_path):
        cfg = write_config(tmp_path, small_copy("full", paths=1, dt=0.1))
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
        a = tmp_path / "a" / "trajectories" / "path_0000.csv"
        assert not filecmp.cmp(a, tmp_path / "b" / "trajectories" / "path_0000.csv", shallow=False)

    def test_config_file_untouched(self, tmp_path):
        raw = small_copy("zero", paths=1)
        cfg = write_config(tmp_path, raw)
        before = copy.deepcopy(raw)
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert json.loads(open(cfg).read()) == before
