from pathlib import Path

import pytest

from symot.config import apply_overrides, build_config, load_experiment, parse_config_text, resolve_key
from symot.errors import ConfigError
from symot.schemas import ExperimentConfig, RunManifest

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_parse_nested_values_and_comments():
    tree, lines = parse_config_text(
        "# header\n"
        "experiment.name = demo  # trailing note\n"
        "\n"
        "data.source.kind = moons\n"
        "data.source.mean = none\n"
        "train.kernel_scales = 0.5,1,2\n"
        "experiment.out_dir = 'runs/a b'\n"
    )
    assert tree == {
        "experiment": {"name": "demo", "out_dir": "runs/a b"},
        "data": {"source": {"kind": "moons", "mean": None}},
        "train": {"kernel_scales": "0.5,1,2"},
    }
    assert lines["data.source.kind"] == 4


@pytest.mark.parametrize(
    "text,line",
    [
        ("train.beta = 1\ntrain.beta = 2\n", 2),
        ("train.beta 1\n", 1),
        ("\nmodel.width = 3\n", 2),
        ("train.beta = 1\ntrain.beta.x = 2\n", 2),
        ("train = 1\n", 1),
    ],
    ids=["duplicate", "no-equals", "unknown-section", "value-as-section", "bare-section"],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_validation_errors_name_key_and_line():
    tree, lines = parse_config_text(
        "data.source.kind = moons\ndata.target.kind = circles\ntrain.beta = -1\n"
    )
    with pytest.raises(ConfigError) as info:
        build_config(tree, lines)
    assert info.value.key == "train.beta"
    assert info.value.line == 3
    assert info.value.exit_code == 1


def test_unknown_kind_is_a_config_error():
    tree, lines = parse_config_text("data.source.kind = spirals\ndata.target.kind = circles\n")
    with pytest.raises(ConfigError) as info:
        build_config(tree, lines)
    assert info.value.key == "data.source.kind"


def test_train_seed_follows_experiment_seed():
    tree, lines = parse_config_text(
        "experiment.seed = 7\ndata.source.kind = moons\ndata.target.kind = circles\n"
    )
    assert build_config(tree, lines).train.seed == 7
    tree, lines = parse_config_text(
        "experiment.seed = 7\ntrain.seed = 2\ndata.source.kind = moons\ndata.target.kind = circles\n"
    )
    assert build_config(tree, lines).train.seed == 2


def test_bare_override_keys():
    assert resolve_key("beta") == "train.beta"
    assert resolve_key("name") == "experiment.name"
    assert resolve_key("seed") == "experiment.seed"
    assert resolve_key("data.source.n") == "data.source.n"
    with pytest.raises(ConfigError):
        resolve_key("kind")


def test_overrides_replace_file_values():
    config = load_experiment(CONFIGS / "moons2circles.cfg", ["beta=0", "symmetric=false", "train.epochs=5"])
    assert config.train.beta == 0.0
    assert config.train.symmetric is False
    assert config.train.epochs == 5
    assert config.data.source.kind == "moons"
    with pytest.raises(ConfigError):
        apply_overrides({}, ["beta"])


def test_seed_override_reseeds_training():
    config = load_experiment(CONFIGS / "moons2circles.cfg", ["seed=9"])
    assert (config.experiment.seed, config.train.seed) == (9, 9)
    config = load_experiment(CONFIGS / "moons2circles.cfg", ["seed=9", "train.seed=4"])
    assert (config.experiment.seed, config.train.seed) == (9, 4)
    config = load_experiment(CONFIGS / "moons2circles.cfg", ["train.seed=4"])
    assert config.train.seed == 4
    assert config.experiment.seed != 4


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.cfg")):
        assert isinstance(load_experiment(path), ExperimentConfig)
    config = load_experiment(CONFIGS / "moons2circles.cfg")
    assert config.train.kernel_scales == [8.0, 16.0, 32.0, 64.0, 128.0]
    assert config.train.beta == pytest.approx(5e-4)
    for variant in ("moons2circles_single_mmd", "moons2circles_one_direction"):
        assert load_experiment(CONFIGS / f"{variant}.cfg").train.kernel_scales == config.train.kernel_scales
    assert config.out_dir == "runs/moons2circles"


def test_manifest_is_accepted_as_config(tmp_path):
    config = load_experiment(CONFIGS / "moons2circles_single_mmd.cfg")
    manifest = RunManifest(
        library_version="0.1.0",
        config=config,
        config_hash=config.fingerprint(),
        datasets={},
        checkpoints=[],
        trace_path="trace.csv",
        metrics_paths=[],
        wall_clock_seconds=0.0,
    )
    path = tmp_path / "manifest.json"
    path.write_text(manifest.model_dump_json(indent=2))
    again = load_experiment(path)
    assert again == config
    assert again.fingerprint() == config.fingerprint()


def test_broken_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text('{"config": {}}')
    with pytest.raises(ConfigError):
        load_experiment(path)


def test_manifest_rerun_with_a_new_seed(tmp_path):
    config = load_experiment(CONFIGS / "gauss2gauss.cfg")
    manifest = RunManifest(
        library_version="0.1.0",
        config=config,
        config_hash=config.fingerprint(),
        datasets={},
        checkpoints=[],
        trace_path="trace.csv",
        metrics_paths=[],
        wall_clock_seconds=0.0,
    )
    path = tmp_path / "manifest.json"
    path.write_text(manifest.model_dump_json(indent=2))
    again = load_experiment(path, ["seed=11"])
    assert (again.experiment.seed, again.train.seed) == (11, 11)
    assert again.fingerprint() != config.fingerprint()
