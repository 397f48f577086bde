"""
Tests for configuration schemas and loaders.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from thetapress.config import (
    InstanceSpec,
    MeasureSpec,
    MetricSpec,
    PotentialSpec,
    RunConfig,
    SuiteConfig,
    SystemSpec,
    config_schemas,
    load_json,
    load_run_config,
    load_suite_config,
    load_system_spec,
)
from thetapress.errors import ConfigError, InvalidMeasure, InvalidSystem

DOUBLING = {"name": "doubling-8", "metric": {"kind": "circle", "points": 8}, "maps": {"multipliers": [2]}}


def write(path: Path, data) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestSystemSpec:
    def test_generated_doubling(self):
        system = SystemSpec.model_validate(DOUBLING).build()
        assert system.size == 8
        assert list(system.map_at(1)) == [0, 2, 4, 6, 0, 2, 4, 6]
        assert not system.potential.any()

    def test_explicit_tables(self):
        spec = SystemSpec.model_validate(
            {
                "metric": {"matrix": [[0, 1], [1, 0]]},
                "maps": {"prefix": [[0, 0]], "period": [[1, 0]]},
                "potential": {"values": [0.5, -0.5]},
            }
        )
        system = spec.build()
        assert system.prefix_length == 1
        assert list(system.map_at(2)) == [1, 0]

    def test_maps_need_exactly_one_source(self):
        with pytest.raises(ValidationError):
            SystemSpec.model_validate({**DOUBLING, "maps": {"multipliers": [2], "period": [[0] * 8]}})
        with pytest.raises(ValidationError):
            SystemSpec.model_validate({**DOUBLING, "maps": {}})

    def test_schema_version(self):
        with pytest.raises(ValidationError):
            SystemSpec.model_validate({**DOUBLING, "schema_version": 2})

    def test_invalid_tables_surface_as_invalid_system(self):
        spec = SystemSpec.model_validate({"metric": {"matrix": [[0, 1], [1, 0]]}, "maps": {"period": [[0, 2]]}})
        with pytest.raises(InvalidSystem):
            spec.build()

    def test_metric_generators(self):
        assert MetricSpec(kind="hamming", bits=2).build().shape == (4, 4)
        assert MetricSpec(kind="tree", branching=3, depth=2).build().shape == (9, 9)
        assert MetricSpec(kind="euclidean", coordinates=[[0, 0], [3, 4]]).build()[0, 1] == pytest.approx(5.0)
        with pytest.raises(InvalidSystem):
            MetricSpec(kind="circle").build()

    def test_ultrametric_tree_kind(self):
        named = MetricSpec.model_validate({"kind": "ultrametric_tree", "branching": 2, "depth": 3}).build()
        alias = MetricSpec(kind="tree", branching=2, depth=3).build()
        assert named.shape == (8, 8)
        assert (named == alias).all()

    def test_ultrametric_tree_system_file(self):
        spec = SystemSpec.model_validate(
            {
                "metric": {"kind": "ultrametric_tree", "branching": 2, "depth": 2, "decay": 0.5},
                "maps": {"multipliers": [2]},
            }
        )
        assert spec.build().metric[0, 3] == pytest.approx(1.0)


class TestPotentialSpec:
    def test_generators(self):
        assert list(PotentialSpec(generator="constant:0.25").build(3)) == [0.25, 0.25, 0.25]
        assert list(PotentialSpec(generator="indicator:0,2").build(3)) == [1.0, 0.0, 1.0]
        assert not PotentialSpec(generator="zero").build(4).any()

    def test_unknown_generator(self):
        with pytest.raises(InvalidSystem):
            PotentialSpec(generator="sine").build(3)

    def test_indicator_out_of_range(self):
        with pytest.raises(InvalidSystem):
            PotentialSpec(generator="indicator:5").build(3)

    def test_override_in_run_config(self):
        config = RunConfig.model_validate({"system": DOUBLING, "potential": {"generator": "constant:1"}})
        system = config.resolve_system(Path("."))
        assert np.all(system.potential == 1.0)


class TestRunConfig:
    """Defaults and validation of the run inputs"""

    def test_defaults(self):
        config = RunConfig.model_validate({"system": DOUBLING})
        assert [str(theta) for theta in config.thetas()] == ["0", "1/4", "1/2", "3/4", "1"]
        assert (config.n_lo, config.n_hi) == (2, 4)
        assert config.output_dir == "out"
        assert config.jobs == 1

    def test_exact_theta_strings(self):
        config = RunConfig.model_validate({"system": DOUBLING, "theta_grid": ["1/3", 0.5]})
        assert [str(theta) for theta in config.thetas()] == ["1/3", "1/2"]

    def test_theta_out_of_range(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": DOUBLING, "theta_grid": [1.5]})

    def test_ladder_must_decrease(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": DOUBLING, "epsilon_ladder": [0.1, 0.2]})
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": DOUBLING, "epsilon_ladder": [0.2, -0.1]})

    def test_window(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": DOUBLING, "n_window": [3, 2]})
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": DOUBLING, "n_window": [0, 2]})

    def test_subset(self):
        system = SystemSpec.model_validate(DOUBLING).build()
        assert RunConfig.model_validate({"system": DOUBLING}).resolve_subset(system) == frozenset(range(8))
        config = RunConfig.model_validate({"system": DOUBLING, "subset": [1, 3]})
        assert config.resolve_subset(system) == frozenset({1, 3})
        with pytest.raises(ConfigError):
            RunConfig.model_validate({"system": DOUBLING, "subset": [9]}).resolve_subset(system)
        with pytest.raises(ConfigError):
            RunConfig.model_validate({"system": DOUBLING, "subset": "some"}).resolve_subset(system)

    def test_system_file_reference(self, tmp_path):
        write(tmp_path / "system.json", DOUBLING)
        config = RunConfig.model_validate({"system": "system.json"})
        assert config.resolve_system(tmp_path).name == "doubling-8"

    def test_default_measures(self):
        config = RunConfig.model_validate({"system": DOUBLING})
        system = config.resolve_system(Path("."))
        measures = config.resolve_measures(system, frozenset({0, 1}))
        assert [m.name for m in measures] == ["uniform", "geometric"]

    def test_measure_specs(self):
        with pytest.raises(InvalidMeasure):
            MeasureSpec(kind="dirac").build(4, frozenset({0}), 0)
        assert len(MeasureSpec(kind="random", count=3).build(4, frozenset({0, 1}), 0)) == 3


class TestSuiteConfig:
    def test_defaults(self):
        suite = SuiteConfig()
        settings = suite.settings()
        assert str(settings.theta) == "1/2"
        assert (settings.n_lo, settings.n_hi) == (2, 4)
        assert len(suite.build_battery(Path("."))) == 5

    def test_theta_grid_defaults_are_floats(self):
        for config in (SuiteConfig(), RunConfig.model_validate({"system": DOUBLING})):
            assert config.theta_grid == [0.0, 0.25, 0.5, 0.75, 1.0]
            assert all(isinstance(theta, float) for theta in config.theta_grid)

    def test_unknown_check(self):
        with pytest.raises(ValidationError):
            SuiteConfig.model_validate({"checks": ["closure", "nonsense"]})

    def test_empty_battery(self):
        with pytest.raises(ConfigError):
            SuiteConfig.model_validate({"builtin": False}).build_battery(Path("."))

    def test_custom_instance(self):
        spec = InstanceSpec.model_validate(
            {"name": "custom", "system": DOUBLING, "epsilon": 0.2, "relabel_seed": 4, "commuting": [
                [(2 * x) % 8 for x in range(8)], [(3 * x) % 8 for x in range(8)]
            ]}
        )
        instance = spec.build(Path("."))
        assert instance.name == "custom"
        assert len(instance.factors) == 1
        assert instance.commuting is not None

    def test_commuting_tables_validated(self):
        spec = InstanceSpec.model_validate(
            {"name": "bad", "system": DOUBLING, "epsilon": 0.2, "commuting": [[0] * 8, [9] * 8]}
        )
        with pytest.raises(InvalidSystem):
            spec.build(Path("."))

    def test_random_instances_added(self):
        suite = SuiteConfig.model_validate({"builtin": False, "random_count": 3, "seed": 2})
        assert [i.name for i in suite.build_battery(Path("."))] == ["random-2-0", "random-2-1", "random-2-2"]


class TestLoaders:
    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "system": ,\n}', encoding="utf-8")
        with pytest.raises(ConfigError) as caught:
            load_json(path)
        assert caught.value.line == 2
        assert caught.value.column is not None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_json(tmp_path / "absent.json")

    def test_top_level_must_be_an_object(self, tmp_path):
        with pytest.raises(ConfigError):
            load_json(write(tmp_path / "list.json", [1, 2]))

    def test_validation_errors_become_config_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(write(tmp_path / "run.json", {"system": DOUBLING, "jobs": 0}))

    def test_load_system_spec(self, tmp_path):
        assert load_system_spec(write(tmp_path / "s.json", DOUBLING)).name == "doubling-8"

    def test_default_suite_without_path(self):
        assert load_suite_config(None).builtin

    def test_schemas(self):
        schemas = config_schemas()
        assert set(schemas) == {"RunConfig", "SuiteConfig"}
        assert "epsilon_ladder" in schemas["RunConfig"]["properties"]


class TestShippedConfigs:
    """The example files under configs/ stay valid"""

    configs = Path(__file__).resolve().parent.parent / "configs"

    def test_doubling_run(self):
        config = load_run_config(self.configs / "doubling8.json")
        system = config.resolve_system(self.configs)
        assert system.size == 8
        assert config.resolve_subset(system) == frozenset(range(8))
        assert len(config.resolve_measures(system, frozenset(range(8)))) == 2

    def test_suite(self):
        suite = load_suite_config(self.configs / "suite.json")
        battery = suite.build_battery(self.configs)
        assert len(battery) == 5 + 1 + 4
        custom = next(instance for instance in battery if instance.name == "alternating4")
        assert custom.factors[0].is_conjugacy
