"""
测试命令行：退出码、输出保护与各子命令
"""

import json


from mjollnir.core.data import load_dataset
from mjollnir.interfaces.cli.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def run_pipeline_head(tmp_path, dataset, config, name="run"):
    """stats → train，返回训练输出目录"""
    stats = tmp_path / f"{name}_stats.json"
    out = tmp_path / name
    assert main(["stats", "--config", str(config), "--dataset", str(dataset), "--out", str(stats)]) == EXIT_OK
    assert main([
        "train", "--config", str(config), "--dataset", str(dataset), "--stats", str(stats), "--out", str(out),
    ]) == EXIT_OK
    return out


class TestParser:
    """参数解析测试"""

    def test_version(self, capsys):
        """测试 --version 退出码为 0"""
        assert main(["--version"]) == EXIT_OK
        assert "mjollnir" in capsys.readouterr().out

    def test_missing_subcommand(self):
        """测试缺少子命令时退出码为 2"""
        assert main([]) == EXIT_USAGE

    def test_unknown_option(self):
        """测试未知选项"""
        assert main(["train", "--epochs", "3"]) == EXIT_USAGE


class TestSynth:
    """synth 子命令测试"""

    def test_refuses_overwrite_without_force(self, tmp_path, capsys):
        """测试已有输出时需要 --force"""
        out = tmp_path / "synth.mgrid"
        args = ["synth", "--out", str(out), "--years", "2010", "--resolution", "30"]
        assert main(args) == EXIT_OK
        assert len(load_dataset(out)) == 365
        assert main(args) == EXIT_USAGE
        assert "--force" in capsys.readouterr().err
        assert main(args + ["--force"]) == EXIT_OK

    def test_bad_years(self, tmp_path):
        """测试年份无法解析"""
        assert main(["synth", "--out", str(tmp_path / "s.mgrid"), "--years", "twenty"]) == EXIT_USAGE


class TestConfigErrors:
    """配置与路径错误测试"""

    def test_unknown_config_key(self, tmp_path, small_dataset_path):
        """测试配置中的未知字段退出码为 2"""
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"optim": {"learning_rate": 0.1}}), encoding="utf-8")
        code = main(["stats", "--config", str(bad), "--dataset", str(small_dataset_path), "--out", str(tmp_path / "s.json")])
        assert code == EXIT_USAGE

    def test_missing_dataset(self, tmp_path, capsys):
        """测试数据集不存在时退出码为 2 并给出信息"""
        code = main(["stats", "--dataset", str(tmp_path / "nope.mgrid"), "--out", str(tmp_path / "s.json")])
        assert code == EXIT_USAGE
        assert "nope.mgrid" in capsys.readouterr().err

    def test_missing_path_argument(self, tmp_path):
        """测试命令行与配置都没有给出数据集路径"""
        assert main(["stats", "--out", str(tmp_path / "s.json")]) == EXIT_USAGE


class TestDataCommands:
    """convert-check 与 stats 测试"""

    def test_convert_check(self, small_dataset_path, capsys):
        """测试输出 JSON 摘要"""
        assert main(["convert-check", str(small_dataset_path)]) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["days"] == 16
        assert summary["years"] == [2010, 2011, 2012]
        assert summary["masked_pixels"] == 0
        assert summary["negative_valid_targets"] == 0

    def test_convert_check_strict_grid(self, small_dataset_path):
        """测试严格网格模式下与默认 1° 网格不符"""
        assert main(["convert-check", str(small_dataset_path), "--strict-grid"]) == EXIT_RUNTIME

    def test_stats(self, tmp_path, small_dataset_path, tiny_run_config_path):
        """测试统计量文件包含通道与异常阈值"""
        out = tmp_path / "stats.json"
        args = ["stats", "--config", str(tiny_run_config_path), "--dataset", str(small_dataset_path), "--out", str(out)]
        assert main(args) == EXIT_OK
        data = json.loads(out.read_text(encoding="utf-8"))
        assert len(data["channels"]) == 9
        assert data["train_days"] == 8
        assert data["anomaly_threshold"] > 0
        assert data["quantile"] == 0.99
        assert main(args) == EXIT_USAGE


class TestTrainPredictEvaluate:
    """train / predict / evaluate 测试"""

    def test_train_outputs(self, tmp_path, small_dataset_path, tiny_run_config_path):
        """测试训练写出检查点、损失记录、解析后的配置与监控指标"""
        out = run_pipeline_head(tmp_path, small_dataset_path, tiny_run_config_path)
        for name in ("best.ckpt", "final.ckpt", "metrics.ndjson", "resolved_config.json", "metrics.prom"):
            assert (out / name).exists()
        records = (out / "metrics.ndjson").read_text(encoding="utf-8").splitlines()
        assert len(records) == 2
        resolved = json.loads((out / "resolved_config.json").read_text(encoding="utf-8"))
        assert resolved["seed"] == 3
        assert "mjollnir_train_steps_total" in (out / "metrics.prom").read_text(encoding="utf-8")

    def test_train_byte_identical(self, tmp_path, small_dataset_path, tiny_run_config_path):
        """测试两次同配置训练逐字节相同"""
        a = run_pipeline_head(tmp_path, small_dataset_path, tiny_run_config_path, "a")
        b = run_pipeline_head(tmp_path, small_dataset_path, tiny_run_config_path, "b")
        for name in ("metrics.ndjson", "final.ckpt", "best.ckpt"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_train_refuses_overwrite_and_resume_needs_checkpoint(self, tmp_path, small_dataset_path, tiny_run_config_path):
        """测试训练输出保护与续训前置条件"""
        out = run_pipeline_head(tmp_path, small_dataset_path, tiny_run_config_path)
        base = ["train", "--config", str(tiny_run_config_path), "--dataset", str(small_dataset_path),
                "--stats", str(tmp_path / "run_stats.json")]
        assert main(base + ["--out", str(out)]) == EXIT_USAGE
        assert main(base + ["--out", str(tmp_path / "empty"), "--resume"]) == EXIT_USAGE

    def test_predict_and_incomplete_year(self, tmp_path, small_dataset_path, tiny_run_config_path):
        """测试预测测试年份；测试年不完整时评估以运行时错误退出"""
        out = run_pipeline_head(tmp_path, small_dataset_path, tiny_run_config_path)
        pred = tmp_path / "pred.mgrid"
        assert main([
            "predict", "--config", str(tiny_run_config_path), "--checkpoint", str(out / "best.ckpt"),
            "--dataset", str(small_dataset_path), "--stats", str(tmp_path / "run_stats.json"), "--out", str(pred),
        ]) == EXIT_OK
        predictions = load_dataset(pred)
        assert [d.year for d in predictions.dates] == [2012] * 4
        assert predictions.channel_names == ["logit", "magnitude"]
        sample = predictions[0]
        assert (sample.target >= 0).all()
        assert (sample.predictors[1] > 0).all()

        code = main([
            "evaluate", "--config", str(tiny_run_config_path), "--predictions", str(pred),
            "--observations", str(small_dataset_path), "--out", str(tmp_path / "eval"),
        ])
        assert code == EXIT_RUNTIME

    def test_report_requires_evaluation(self, tmp_path):
        """测试评估目录不完整"""
        assert main(["report", "--evaluation", str(tmp_path), "--out", str(tmp_path / "fig")]) == EXIT_USAGE
