import json
from pathlib import Path

import numpy as np
import pytest

from invprox import DynamicsMap, QuadratureSpace, Domain, write_snapshots
from invprox.cli import main

from conftest import DICTIONARIES, DYNAMICS_SOURCES

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


def base_config(dictionary):
    return {
        "state_dim": 2,
        "domain": [[-1.0, 1.0], [-1.0, 1.0]],
        "field": "real",
        "backend": {"type": "quadrature", "order": 20},
        "dynamics": list(DYNAMICS_SOURCES),
        "dictionary": list(dictionary),
        "tolerances": {"rank_tol": 1e-10, "quad_tol": 1e-9},
        "oracle": {"n_samples": 2000, "seed": 0},
        "experiment": {"n_trajectories": 50, "horizon": 10, "sampling_seed": 0},
    }


def write_config(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def run(args):
    return main([str(a) for a in args])


class TestProximityCommand:
    def test_bundled_s2_config(self, tmp_path):
        code = run(["proximity", "--config", CONFIGS_DIR / "s2.json",
                    "--out", tmp_path])
        assert code == 0
        payload = json.loads((tmp_path / "proximity.json").read_text())
        assert payload["invariance_proximity"] == pytest.approx(0.048, abs=0.002)
        assert payload["dim_S"] == 4
        assert payload["dim_KS"] == 4
        assert payload["dim_W"] == 5
        assert len(payload["principal_angles_rad"]) == 4
        assert len(payload["witness_coeffs"]) == 4
        assert payload["diagnostics"]["quad_order"] == 20

    def test_bundled_s1_config(self, tmp_path):
        code = run(["proximity", "--config", CONFIGS_DIR / "s1.json",
                    "--out", tmp_path])
        assert code == 0
        payload = json.loads((tmp_path / "proximity.json").read_text())
        assert payload["invariance_proximity"] <= 1e-8

    def test_empty_dictionary_is_config_error(self, tmp_path):
        config = base_config(DICTIONARIES["S1"])
        config["dictionary"] = []
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 2

    def test_unknown_key_rejected(self, tmp_path):
        config = base_config(DICTIONARIES["S1"])
        config["quadorder"] = 10
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 2

    def test_bad_expression_rejected(self, tmp_path):
        config = base_config(DICTIONARIES["S1"])
        config["dictionary"] = ["x1 +"]
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        code = run(["proximity", "--config", tmp_path / "nope.json",
                    "--out", tmp_path])
        assert code == 2

    def test_degenerate_dictionary_is_numerical_failure(self, tmp_path):
        config = base_config(["0*x1"])
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 3

    def test_empirical_with_dynamics_rejected(self, tmp_path, dynamics):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(50, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S2"])
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 2

    def test_quad_order_override_on_empirical_rejected(self, tmp_path, dynamics):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(50, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S2"])
        del config["dynamics"]
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path, "--quad-order", 10])
        assert code == 2

    def test_empirical_proximity_runs(self, tmp_path, dynamics):
        rng = np.random.default_rng(1)
        X = rng.uniform(-1, 1, size=(400, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S2"])
        del config["dynamics"]
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        code = run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", tmp_path])
        assert code == 0
        payload = json.loads((tmp_path / "proximity.json").read_text())
        assert 0.0 <= payload["invariance_proximity"] <= 1.0
        assert payload["diagnostics"]["backend"] == "empirical"

    def test_weighted_nodes_reproduce_quadrature_backend(self, tmp_path, dynamics):
        # quadrature nodes as snapshots, rule weights folded in
        space = QuadratureSpace(Domain(((-1, 1), (-1, 1))), 20)
        snaps = tmp_path / "nodes.csv"
        write_snapshots(snaps, space.nodes, dynamics(space.nodes))
        weights = tmp_path / "weights.csv"
        weights.write_text(
            "w\n" + "\n".join(format(w, ".17g") for w in space.weights) + "\n"
        )
        config = base_config(DICTIONARIES["S3"])
        del config["dynamics"]
        config["backend"] = {
            "type": "empirical",
            "snapshot_path": str(snaps),
            "weights_path": str(weights),
        }
        out_emp = tmp_path / "emp"
        assert run(["proximity", "--config", write_config(tmp_path, config),
                    "--out", out_emp]) == 0
        out_quad = tmp_path / "quad"
        assert run(["proximity", "--config", CONFIGS_DIR / "s3.json",
                    "--out", out_quad]) == 0
        emp = json.loads((out_emp / "proximity.json").read_text())
        ref = json.loads((out_quad / "proximity.json").read_text())
        assert abs(emp["invariance_proximity"] - ref["invariance_proximity"]) < 1e-6

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run(["proximity", "--config", CONFIGS_DIR / "s2.json",
                        "--out", out]) == 0
        assert (out_a / "proximity.json").read_bytes() == \
               (out_b / "proximity.json").read_bytes()


class TestTable1Command:
    def test_values_and_csv(self, tmp_path):
        assert run(["table1", "--out", tmp_path]) == 0
        lines = (tmp_path / "table1.csv").read_text().splitlines()
        assert lines[0] == "subspace,proximity"
        values = {row.split(",")[0]: float(row.split(",")[1]) for row in lines[1:]}
        assert values["S1"] <= 1e-8
        assert values["S2"] == pytest.approx(0.048, abs=0.002)
        assert values["S3"] == pytest.approx(0.823, abs=0.005)

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run(["table1", "--out", out]) == 0
        assert (out_a / "table1.csv").read_bytes() == \
               (out_b / "table1.csv").read_bytes()


class TestPredictCommand:
    def test_invariant_subspace_errors_vanish(self, tmp_path):
        assert run(["predict", "--config", CONFIGS_DIR / "s1.json",
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        assert payload["n_trajectories"] == 100
        assert payload["excluded"] == 0
        for step in payload["steps"]:
            assert step["max"] <= 1e-8

    def test_ordering_and_seed_consistency(self, tmp_path):
        out2, out3 = tmp_path / "s2", tmp_path / "s3"
        assert run(["predict", "--config", CONFIGS_DIR / "s2.json",
                    "--out", out2, "--seed", 77]) == 0
        assert run(["predict", "--config", CONFIGS_DIR / "s3.json",
                    "--out", out3, "--seed", 77]) == 0
        steps2 = json.loads((out2 / "predict.json").read_text())["steps"]
        steps3 = json.loads((out3 / "predict.json").read_text())["steps"]
        assert len(steps2) == len(steps3) == 10
        for a, b in zip(steps2, steps3):
            assert a["median"] < b["median"]

    def test_zero_horizon(self, tmp_path):
        config = base_config(DICTIONARIES["S2"])
        config["experiment"]["horizon"] = 0
        assert run(["predict", "--config", write_config(tmp_path, config),
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        assert payload["steps"] == []
        lines = (tmp_path / "predict.csv").read_text().splitlines()
        assert lines[0] == "# seed=0"
        assert lines[-1] == "k,median,q25,q75,min,max"

    def test_requires_dynamics(self, tmp_path, dynamics):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, size=(30, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S2"])
        del config["dynamics"]
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        assert run(["predict", "--config", write_config(tmp_path, config),
                    "--out", tmp_path]) == 2

    def test_empirical_model_with_simulated_truth(self, tmp_path, dynamics):
        # empirical backend for the model, dynamics kept for simulation
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, size=(300, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S1"])
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        assert run(["predict", "--config", write_config(tmp_path, config),
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "predict.json").read_text())
        for step in payload["steps"]:
            assert step["max"] <= 1e-6  # invariant subspace, data-driven model

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run(["predict", "--config", CONFIGS_DIR / "s2.json",
                        "--out", out]) == 0
        assert (out_a / "predict.csv").read_bytes() == \
               (out_b / "predict.csv").read_bytes()
        assert (out_a / "predict.json").read_bytes() == \
               (out_b / "predict.json").read_bytes()


class TestOracleCommand:
    def test_invariant_subspace(self, tmp_path):
        assert run(["oracle", "--config", CONFIGS_DIR / "s1.json",
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "oracle.json").read_text())
        assert payload["closed_form"] <= 1e-8
        assert payload["oracle_max"] <= 1e-8

    def test_gap_after_refinement(self, tmp_path):
        assert run(["oracle", "--config", CONFIGS_DIR / "s3.json",
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "oracle.json").read_text())
        assert payload["oracle_max"] <= payload["closed_form"] + 1e-8
        assert payload["gap"] < 0.01 * payload["closed_form"]
        assert len(payload["argmax_coeffs"]) == 5

    def test_single_sample_is_valid(self, tmp_path):
        config = base_config(DICTIONARIES["S3"])
        config["oracle"] = {"n_samples": 1, "seed": 4}
        assert run(["oracle", "--config", write_config(tmp_path, config),
                    "--out", tmp_path]) == 0
        payload = json.loads((tmp_path / "oracle.json").read_text())
        assert payload["oracle_max"] <= payload["closed_form"] + 1e-8


class TestResidualsCommand:
    def test_invariant_subspace(self, tmp_path):
        assert run(["residuals", "--config", CONFIGS_DIR / "s1.json",
                    "--out", tmp_path]) == 0
        lines = (tmp_path / "residuals.csv").read_text().splitlines()
        assert lines[0] == "lambda_re,lambda_im,residual,bound"
        assert len(lines) == 4
        for row in lines[1:]:
            assert float(row.split(",")[2]) <= 1e-8

    def test_bound_holds(self, tmp_path):
        assert run(["residuals", "--config", CONFIGS_DIR / "s3.json",
                    "--out", tmp_path]) == 0
        for row in (tmp_path / "residuals.csv").read_text().splitlines()[1:]:
            _, _, residual, bound = map(float, row.split(","))
            assert residual <= bound + 1e-8

    def test_empirical_backend(self, tmp_path, dynamics):
        rng = np.random.default_rng(5)
        X = rng.uniform(-1, 1, size=(400, 2))
        snaps = tmp_path / "snaps.csv"
        write_snapshots(snaps, X, dynamics(X))
        config = base_config(DICTIONARIES["S3"])
        del config["dynamics"]
        config["backend"] = {"type": "empirical", "snapshot_path": str(snaps)}
        assert run(["residuals", "--config", write_config(tmp_path, config),
                    "--out", tmp_path]) == 0
        rows = (tmp_path / "residuals.csv").read_text().splitlines()[1:]
        assert rows
        for row in rows:
            _, _, residual, bound = map(float, row.split(","))
            assert np.isfinite(residual)
            assert residual <= bound + 1e-8
