import json

import pytest

from eqvslam.config import ConfigError, RunConfig, config_to_dict, load_config, parse_config


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.observer.k == 5.0 and cfg.scenario.duration == 60.0


def test_full_config():
    text = """\
preset: standard
scenario:
  duration: 12
  seed: 4
  noise: 0.01
observer:
  k: 2
  alpha: 50
  integrator: rk4
replay:
  min_sightings: 3
sweep:
  k: [1, 5]
  samples: 10
"""
    cfg = parse_config(text)
    assert cfg.scenario.duration == 12.0 and cfg.scenario.seed == 4
    assert cfg.observer.k == 2.0 and cfg.observer.integrator == "rk4"
    assert cfg.scenario.observer is cfg.observer
    assert cfg.replay.min_sightings == 3
    assert cfg.sweep.k == (1.0, 5.0) and cfg.sweep.samples == 10


def test_schedule_and_landmarks():
    text = """\
scenario:
  trajectory: schedule
  segments:
    - {t_start: 0, omega: [0, 0, 0.5], v: [1.5, 0, 0]}
    - {t_start: 5, omega: [0, 0, 0], v: [1, 0, 0]}
  landmarks: [[1, 2, 0], [3, -1, 0]]
"""
    cfg = parse_config(text)
    assert len(cfg.scenario.segments) == 2
    assert cfg.scenario.landmark_positions().shape == (2, 3)


def test_scalar_gain_becomes_grid():
    assert parse_config("sweep: {k: 5}").sweep.k == (5.0,)


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario:\n  duration: 5\n  bogus: 1\n", 3, "unknown key 'bogus'"),
    ("observer:\n  k: -1\n", 2, "k must be positive"),
    ("observer:\n  k: 1\n  integrator: midpoint\n", 3, "integrator"),
    ("replay:\n  min_sightings: 1.5\n", 2, "integer"),
    ("extra: 1\n", 1, "unknown section"),
    ("preset: nope\n", 1, "unknown preset"),
    ("scenario:\n  observer: {k: 1}\n", 2, "top-level 'observer'"),
    ("scenario:\n  duration: -3\n", 2, "duration"),
    ("scenario:\n  landmarks: [[1, 2]]\n", 2, "three coordinates"),
    ("scenario:\n  trajectory: schedule\n  segments:\n    - {t_start: 0}\n", 4, "segment 0"),
    ("observer: [1, 2]\n", 1, "must be a mapping"),
    ("observer:\n  k: [1\n", 3, "YAML syntax"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "run.yaml")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"run.yaml:{line}:")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_load_from_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("observer: {alpha: 0.5}\n")
    assert load_config(path).observer.alpha == 0.5


def test_config_to_dict_is_json_serialisable():
    text = json.dumps(config_to_dict(RunConfig()))
    assert '"alpha": 500.0' in text


def test_with_observer_replaces_nested_settings():
    cfg = RunConfig().with_observer(dt=0.01)
    assert cfg.scenario.observer.dt == 0.01 and cfg.scenario.n_steps == 6000
