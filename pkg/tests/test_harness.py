import json

import numpy as np
import pytest
import yaml

from dystrat.errors import DyStratError, InvalidParameterError
from dystrat.harness import cli, runner
from dystrat.harness.config import (
    DatasetConfig,
    ExperimentConfig,
    SubsetCurveConfig,
    dump_config,
    load_config,
    load_grid,
)
from dystrat.harness.report import EmitError, emit, read_sidecar_config
from dystrat.mlp import MlpConfig
from dystrat.selector import ClassifierConfig

SMALL = ExperimentConfig(
    name="small",
    dataset=DatasetConfig(kind="sine", n=500),
    horizon=4,
    repeats=2,
    mlp=MlpConfig(hidden_width=12, max_epochs=25),
    classifiers=(ClassifierConfig(kind="knn"), ClassifierConfig(kind="ts-forest", n_trees=10)),
)


@pytest.fixture(scope="module")
def small_run():
    return runner.run_experiment(SMALL)


class TestRun:
    def test_columns(self, small_run):
        assert small_run.column_names == ["mo", "rectify", "d1", "r1", "dirrec", "d2", "r2",
                                          "ds_knn", "ds_tsf"]
        assert small_run.seeds == [0, 1]
        rep = small_run.reports[0]
        assert rep.metadata["n_eval"] == 48 and rep.metadata["n_train"] == 330

    def test_oracle_floor(self, small_run):
        for rep in small_run.reports:
            assert rep.oracle_relative == 1.0
            assert np.all(rep.relative_mse >= 1.0 - 1e-12)

    def test_dystrat_dispatches(self, small_run):
        for art in small_run.artifacts:
            lo, hi = art.eval_losses.min(axis=1), art.eval_losses.max(axis=1)
            for name, sel in art.selectors.items():
                chosen = sel.select_batch(art.eval_inputs)
                loss = art.eval_losses[np.arange(len(chosen)), chosen]
                assert np.all(loss >= lo) and np.all(loss <= hi)

    def test_single_strategy(self):
        cfg = SMALL.replace(repeats=1, strategy_filter=("mo",), classifiers=())
        run = runner.run_experiment(cfg)
        assert run.column_names == ["mo"]
        assert run.reports[0].relative_mse.tolist() == [1.0]

    def test_aggregate_deterministic(self, small_run):
        again = runner.run_experiment(SMALL)
        assert again.aggregate() == small_run.aggregate()

    def test_phase_error_isolated(self, monkeypatch):
        real = runner.train_all

        def flaky(specs, train, cfg):
            if cfg.seed == 1:
                raise RuntimeError("boom")
            return real(specs, train, cfg)

        monkeypatch.setattr(runner, "train_all", flaky)
        run = runner.run_experiment(SMALL.replace(classifiers=()))
        assert run.seeds == [0]
        assert run.errors == [{"seed": 1, "phase": "strategies", "message": "boom"}]

    def test_all_fail(self, tmp_path):
        cfg = SMALL.replace(dataset=DatasetConfig(kind="csv", path=str(tmp_path / "nope.csv")))
        with pytest.raises(DyStratError, match="every repeat failed"):
            runner.run_experiment(cfg)

    def test_holdout_mode(self):
        cfg = SMALL.replace(repeats=1, selector_holdout_fraction=0.3)
        train, sel_train, ev = runner.prepare_data(cfg, 0)
        assert len(train) + len(sel_train) == 330
        assert train.origin_indices.max() < sel_train.origin_indices.min()
        assert sel_train.origin_indices.max() < ev.origin_indices.min()
        runner.run_experiment(cfg)

    def test_train_range_normalisation(self):
        cfg = SMALL.replace(dataset=DatasetConfig(kind="sine", n=500, normalize="train"))
        train, _, _ = runner.prepare_data(cfg, 0)
        assert train.inputs.min() == 0.0 or train.targets.min() == 0.0


class TestEmit:
    def test_files_and_rows(self, small_run, tmp_path):
        paths = emit(small_run, tmp_path / "out")
        h = SMALL.digest()
        names = {p.name for p in paths}
        assert f"report_{h}.csv" in names and f"report_{h}_seed1.csv" in names
        assert f"strategies_{h}_seed0.npz" in names and f"selector_{h}_seed1_ds_tsf.npz" in names
        lines = (tmp_path / "out" / f"report_{h}_seed0.csv").read_text().splitlines()
        assert len(lines) - 1 == len(small_run.column_names)
        assert lines[0].startswith("column_name,mse,mae,mape,smape,maxerr,relative_mse")

    def test_refuses_without_force(self, small_run, tmp_path):
        emit(small_run, tmp_path, bundles=False)
        with pytest.raises(EmitError):
            emit(small_run, tmp_path, bundles=False)
        emit(small_run, tmp_path, force=True, bundles=False)

    def test_sidecar_roundtrip(self, small_run, tmp_path):
        emit(small_run, tmp_path, bundles=False)
        back = read_sidecar_config(tmp_path / f"report_{SMALL.digest()}.json")
        assert back == SMALL
        side = json.loads((tmp_path / f"report_{SMALL.digest()}.json").read_text())
        assert side["seeds"] == [0, 1] and len(side["per_seed"]) == 2

    def test_byte_identical(self, small_run, tmp_path):
        again = runner.run_experiment(SMALL)
        emit(small_run, tmp_path / "a", bundles=False)
        emit(again, tmp_path / "b", bundles=False)
        for name in (f"report_{SMALL.digest()}.csv", f"report_{SMALL.digest()}_seed0.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bundles_reload(self, small_run, tmp_path):
        from dystrat.selector import TrainedSelector
        from dystrat.strategies import StrategySet

        emit(small_run, tmp_path)
        h = SMALL.digest()
        sset = StrategySet.load(tmp_path / f"strategies_{h}_seed0.npz")
        sel = TrainedSelector.load(tmp_path / f"selector_{h}_seed0_ds_knn.npz", sset)
        art = small_run.artifacts[0]
        assert np.array_equal(sel.select_batch(art.eval_inputs),
                              art.selectors["ds_knn"].select_batch(art.eval_inputs))


class TestSubsetCurve:
    def test_full_and_single(self, small_run):
        curve = runner.subset_curve(SMALL, [1, 7], 5, run=small_run, restricted_pool=None)
        assert len(curve.relative[7]) == 1
        q = curve.quantiles[7]
        assert q["median"] == q["q25"] == q["q75"]
        rep = small_run.reports[0]
        for subset, rel in zip(curve.subsets[1], curve.relative[1]):
            assert rel == pytest.approx(rep.relative_mse[subset[0]], rel=1e-12)
        fixed = [rep.relative_mse[s[0]] for s in curve.subsets[1]]
        assert curve.quantiles[1]["median"] == pytest.approx(np.median(fixed), rel=1e-12)

    def test_oracle_monotone(self, small_run):
        curve = runner.subset_curve(SMALL, [1, 2, 4, 7], 6, run=small_run, restricted_pool=None)
        art = small_run.artifacts[0]
        for k in (1, 2, 4):
            for sub in curve.subsets[k]:
                rest = [i for i in range(7) if i not in sub]
                superset = sub + rest[:1]
                a = art.eval_losses[:, superset].min(axis=1)
                b = art.eval_losses[:, sub].min(axis=1)
                assert np.all(a <= b)
        assert curve.oracle_relative[7] == [1.0]

    def test_restricted(self, small_run):
        curve = runner.subset_curve(SMALL, [2, 3], 3, run=small_run,
                                    restricted_pool="exclude-recursive")
        assert curve.restricted["pool"] == ["mo", "d1", "dirrec", "d2"]
        direct = runner.pool_indices(small_run.artifacts[0].strategy_set, "direct-only")
        assert [small_run.column_names[i] for i in direct] == ["mo", "d1", "d2"]

    def test_too_large(self, small_run):
        with pytest.raises(InvalidParameterError):
            runner.subset_curve(SMALL, [8], 3, run=small_run)


class TestAblation:
    def test_two_strategies(self):
        cfg = SMALL.replace(repeats=1, strategy_filter=("mo", "d1"))
        run = runner.run_experiment(cfg)
        res = runner.ablate_gstar(cfg, run)
        art = run.artifacts[0]
        g = run.column_names.index(res.gstar[0])
        other = 1 - g
        oracle = art.eval_losses.min(axis=1).mean()
        assert res.ablated_relative[0] == art.eval_losses[:, other].mean() / oracle
        assert res.full_relative[0] == run.reports[0].relative("ds_tsf")
        assert res.ablated_relative[0] >= 1.0 and res.gstar_relative[0] >= 1.0

    def test_summary(self, small_run):
        res = runner.ablate_gstar(SMALL, small_run)
        assert set(res.summary()) == {"gstar_relative", "ablated_relative", "full_relative"}
        assert len(res.gstar) == 2

    def test_needs_two(self):
        cfg = SMALL.replace(repeats=1, strategy_filter=("mo",))
        with pytest.raises(InvalidParameterError):
            runner.ablate_gstar(cfg)


class TestSweep:
    def test_grid_and_intersection(self):
        grid = [SMALL.replace(name=f"h{h}", horizon=h, repeats=1, classifiers=(ClassifierConfig(kind="knn"),))
                for h in (2, 4)]
        res = runner.sweep(grid)
        assert len(res.results) == 2 and not res.failures
        assert res.common_columns == ["mo", "rectify", "d1", "r1", "dirrec", "ds_knn"]
        assert set(res.rank_table) == set(res.common_columns)

    def test_failure_recorded(self, tmp_path):
        bad = SMALL.replace(name="bad", dataset=DatasetConfig(kind="csv", path=str(tmp_path / "x.csv")))
        res = runner.sweep([bad, SMALL.replace(repeats=1, classifiers=())])
        assert [f["name"] for f in res.failures] == ["bad"]
        assert len(res.results) == 1

    def test_empty(self):
        with pytest.raises(InvalidParameterError):
            runner.sweep([])


class TestConfig:
    def test_yaml_roundtrip(self, tmp_path):
        cfg = SMALL.replace(subset_curve=SubsetCurveConfig(sizes=(2, 3)))
        dump_config(cfg, tmp_path / "c.yaml")
        assert load_config(tmp_path / "c.yaml") == cfg

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.yaml").write_text("horizn: 4\n")
        with pytest.raises(InvalidParameterError, match="horizn"):
            load_config(tmp_path / "c.yaml")

    def test_grid(self, tmp_path):
        (tmp_path / "g.yaml").write_text(yaml.safe_dump({
            "name": "g", "dataset": {"kind": "sine", "n": 300},
            "grid": {"horizon": [2, 4], "train_fraction": [0.1, 0.8]},
        }))
        cells = load_grid(tmp_path / "g.yaml")
        assert [(c.horizon, c.train_fraction) for c in cells] == [(2, 0.1), (2, 0.8), (4, 0.1), (4, 0.8)]
        assert len({c.digest() for c in cells}) == 4

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.horizon, cfg.window, cfg.train_fraction, cfg.repeats) == (20, 40, 0.75, 5)
        assert [c.name for c in cfg.classifiers] == ["ds_linear", "ds_mlp", "ds_knn", "ds_tsf"]
        assert SubsetCurveConfig().restricted_pool == "exclude-recursive"


class TestCli:
    @pytest.fixture()
    def cfg_path(self, tmp_path):
        path = tmp_path / "small.yaml"
        dump_config(SMALL.replace(repeats=1), path)
        return path

    def test_run_and_refuse(self, cfg_path, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        out_dirs = list((tmp_path / "root").iterdir())
        assert len(out_dirs) == 1 and out_dirs[0].name.startswith("small_")
        assert "ds_tsf" in capsys.readouterr().out
        assert cli.main(["run", "--config", str(cfg_path)]) == 1
        assert "--force" in capsys.readouterr().err
        assert cli.main(["run", "--config", str(cfg_path), "--force"]) == 0

    def test_overrides(self, cfg_path, tmp_path):
        out = tmp_path / "o"
        argv = ["run", "--config", str(cfg_path), "--seed", "3", "--horizon", "2",
                "--train-frac", "0.5", "--out", str(out)]
        assert cli.main(argv) == 0
        side = next(out.glob("report_*.json"))
        cfg = read_sidecar_config(side)
        assert (cfg.base_seed, cfg.horizon, cfg.train_fraction) == (3, 2, 0.5)

    def test_gen_data_and_csv_dataset(self, cfg_path, tmp_path):
        csv_path = tmp_path / "sine.csv"
        assert cli.main(["gen-data", "--dataset", "sine", "--out", str(csv_path)]) == 0
        assert len(csv_path.read_text().splitlines()) == 10001
        assert cli.main(["gen-data", "--dataset", "sine", "--out", str(csv_path)]) == 1
        argv = ["run", "--config", str(cfg_path), "--dataset", f"{csv_path}:value",
                "--out", str(tmp_path / "c")]
        assert cli.main(argv) == 0

    def test_subset_and_ablate(self, cfg_path, tmp_path):
        assert cli.main(["subset-curve", "--config", str(cfg_path), "--sizes", "1,7",
                         "--samples", "2", "--out", str(tmp_path / "s")]) == 0
        assert (tmp_path / "s" / "subset_curve.csv").exists()
        assert cli.main(["ablate", "--config", str(cfg_path), "--out", str(tmp_path / "a")]) == 0

    def test_sweep(self, tmp_path):
        raw = yaml.safe_load(yaml.safe_dump(SMALL.replace(repeats=1, classifiers=()).to_dict()))
        raw["grid"] = {"horizon": [2, 4]}
        path = tmp_path / "grid.yaml"
        path.write_text(yaml.safe_dump(raw))
        assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "sw")]) == 0
        assert (tmp_path / "sw" / "rank_table.csv").exists()
        assert (tmp_path / "sw" / "cell01").is_dir()
