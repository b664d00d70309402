"""Tests for run configuration loading and validation"""

import json
from pathlib import Path

import pytest

from platelimit.config import OutputsConfig, RunConfig, load_config, parse_config_text
from platelimit.constants import DEFAULT_MAX_ITER, DEFAULT_TOL_FEAS
from platelimit.exceptions import ConfigError
from platelimit.fem import BoundaryCondition
from platelimit.runner import convergence_levels

TOML_CONFIG = """
element = "p3_hermite"
reference_lambda = 42.851

[domain]
type = "rect"
width = 1.0
height = 1.0

[criterion]
kind = "von_mises"
m0 = "1 + 0.5*x1"

[bcs]
left = "clamped"
right = "clamped"
bottom = "clamped"
top = "clamped"

[load]
kind = "density_expression"
expression = "1 + x2"

[mesh]
nx = 4
ny = 3
pattern = "diag"
"""


def test_default_values():
    """Sections left out of the document take their defaults"""
    config = RunConfig.from_dict(
        {"domain": {"type": "rect", "width": 1.0, "height": 1.0}, "criterion": {"kind": "tresca", "m0": 2.0}}
    )
    assert config.element == "p2_lagrange"
    assert config.mesh.nx == 10 and config.mesh.pattern == "crossed"
    assert config.solver.tol_feas == DEFAULT_TOL_FEAS
    assert config.solver.max_iter == DEFAULT_MAX_ITER
    assert config.outputs == OutputsConfig()
    assert config.outputs.vtk is None
    assert config.load.kind == "uniform_pressure" and config.load.value == 1.0
    assert not config.quarter_symmetry.enabled
    assert config.convergence.levels == 3


def test_toml_config(tmp_path):
    path = tmp_path / "clamped.toml"
    path.write_text(TOML_CONFIG, encoding="utf-8")
    config = load_config(path)
    assert config.element == "p3_hermite"
    assert config.reference_lambda == pytest.approx(42.851)
    assert (config.mesh.nx, config.mesh.ny, config.mesh.pattern) == (4, 3, "diag")
    assert config.criterion.to_dict() == {"kind": "von_mises", "m0": "1 + 0.5*x1"}
    assert not config.build_criterion().is_homogeneous
    assert config.build_load().kind == "density_expression"


def test_json_echo_reparses(quarter_config_dict):
    config = RunConfig.from_dict(quarter_config_dict)
    echo = json.loads(json.dumps(config.to_dict()))
    assert RunConfig.from_dict(echo) == config


def test_quarter_symmetry_adds_conditions(quarter_config_dict):
    config = RunConfig.from_dict(quarter_config_dict)
    assert config.boundary_conditions() == [
        BoundaryCondition("right", "dirichlet"),
        BoundaryCondition("top", "dirichlet"),
        BoundaryCondition("left", "symmetry"),
        BoundaryCondition("bottom", "symmetry"),
    ]


def test_normalization_defaults(quarter_config_dict):
    config = RunConfig.from_dict(quarter_config_dict)
    criterion, load = config.build_criterion(), config.build_load()
    normalization = config.build_normalization(criterion, load)
    assert (normalization.length, normalization.load, normalization.strength) == (1.0, 1.0, 1.0)
    quarter_config_dict["normalization"] = {"length": 2.0, "strength": 4.0}
    normalization = RunConfig.from_dict(quarter_config_dict).build_normalization(criterion, load)
    assert normalization.factor == pytest.approx(1.0)


def test_overrides(quarter_config_dict):
    config = RunConfig.from_dict(quarter_config_dict)
    tuned = config.with_solver(tol_gap=1e-6)
    assert tuned.solver.tol_gap == 1e-6
    assert tuned.solver.tol_feas == config.solver.tol_feas
    assert config.with_mesh(8, 6).mesh.to_dict() == {"nx": 8, "ny": 6, "pattern": "crossed"}
    with pytest.raises(ConfigError, match="/solver/tol_feas"):
        config.with_solver(tol_feas=-1.0)


@pytest.mark.parametrize(
    "patch, pointer",
    [
        ({"mesh": {"nx": 0}}, "/mesh/nx"),
        ({"mesh": {"nx": 2.5}}, "/mesh/nx"),
        ({"mesh": {"pattern": "hex"}}, "/mesh/pattern"),
        ({"element": "p1_linear"}, "/element"),
        ({"criterion": {"kind": "johansen", "m0_plus": 1.0}}, "/criterion/m0_minus"),
        ({"criterion": {"kind": "von_mises", "m0": "1 + * x1"}}, "/criterion/m0"),
        ({"criterion": {"kind": "von_mises", "m0": True}}, "/criterion/m0"),
        ({"bcs": {"right": "pinned"}}, "/bcs/right"),
        ({"bcs": {"left": "dirichlet"}}, "/bcs/left"),
        ({"solver": {"tol_gap": 0.0}}, "/solver/tol_gap"),
        ({"solver": {"max_iters": 10}}, "/solver/max_iters"),
        ({"outputs": {"json": "/tmp/result.json"}}, "/outputs/json"),
        ({"outputs": {"vtk": "../mechanism.vtk"}}, "/outputs/vtk"),
        ({"convergence": {"levels": 1}}, "/convergence/levels"),
        ({"convergence": {"h_list": [0.5]}}, "/convergence/h_list"),
        ({"convergence": {"h_list": [0.5, -0.25]}}, "/convergence/h_list/1"),
        ({"quarter_symmetry": {"enabled": True, "sides": ["west"]}}, "/quarter_symmetry/sides/0"),
        ({"load": {"kind": "density_expression"}}, "/load/expression"),
        ({"load": {"kind": "uniform_pressure", "value": "heavy"}}, "/load/value"),
        ({"reference_lambda": -24.0}, "/reference_lambda"),
        ({"colour": "blue"}, "/colour"),
    ],
)
def test_validation_pointers(quarter_config_dict, patch, pointer):
    """Each invalid value is reported with the JSON pointer of its location"""
    quarter_config_dict.update(patch)
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(quarter_config_dict)
    assert excinfo.value.pointer == pointer
    assert str(excinfo.value).startswith(f"{pointer}: ")


def test_missing_required_sections():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict({"criterion": {"kind": "tresca", "m0": 1.0}})
    assert excinfo.value.pointer == "/domain"
    with pytest.raises(ConfigError, match="expected an object"):
        RunConfig.from_dict([1, 2, 3])


class TestConfigFiles:
    """Reading configuration documents from disk"""

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("domain: {}\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="unsupported configuration file type"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    @pytest.mark.parametrize("text, suffix", [("{not json", ".json"), ("domain = = 1", ".toml")])
    def test_malformed_documents(self, text, suffix):
        with pytest.raises(ConfigError, match="cannot parse configuration") as excinfo:
            parse_config_text(text, suffix)
        assert excinfo.value.pointer == "/"

    def test_mesh_path_resolves_against_config_folder(self, tmp_path):
        (tmp_path / "meshes").mkdir()
        path = tmp_path / "run.json"
        path.write_text(
            json.dumps(
                {
                    "domain": {"type": "mesh_file", "path": "meshes/plate.msh", "format": "msh2_ascii"},
                    "criterion": {"kind": "von_mises", "m0": 1.0},
                }
            ),
            encoding="utf-8",
        )
        config = load_config(path)
        assert config.domain.path == str((tmp_path / "meshes" / "plate.msh").resolve())


SAMPLES = Path(__file__).resolve().parent.parent / "samples"


@pytest.mark.parametrize("name", sorted(p.name for p in SAMPLES.glob("*.json")) + ["quarter_square_hermite.toml"])
def test_sample_configurations_load(name):
    config = load_config(SAMPLES / name)
    assert RunConfig.from_dict(config.to_dict()) == config


class TestConvergenceLevels:
    """Refinement plans derived from the configuration"""

    def test_rectangle_h_list(self, quarter_config_dict):
        levels = convergence_levels(RunConfig.from_dict(quarter_config_dict))
        assert [(lvl.level, lvl.nx, lvl.ny) for lvl in levels] == [(0, 2, 2), (1, 4, 4)]
        assert [lvl.h for lvl in levels] == pytest.approx([0.25, 0.125])

    def test_rectangle_doubling(self, quarter_config_dict):
        del quarter_config_dict["convergence"]
        levels = convergence_levels(RunConfig.from_dict(quarter_config_dict), levels=3)
        assert [lvl.nx for lvl in levels] == [2, 4, 8]

    def test_h_list_is_sorted_coarse_first(self, quarter_config_dict):
        levels = convergence_levels(RunConfig.from_dict(quarter_config_dict), h_list=(0.125, 0.25))
        assert [lvl.nx for lvl in levels] == [2, 4]
        assert [lvl.level for lvl in levels] == [0, 1]

    def test_imported_mesh_is_refined(self):
        levels = convergence_levels(load_config(SAMPLES / "square_mesh_file.json"))
        assert [lvl.h for lvl in levels] == pytest.approx([1.0, 0.5, 0.25])
        assert [lvl.mesh.n_triangles for lvl in levels] == [4, 16, 64]

    def test_imported_mesh_rejects_h_list(self):
        config = load_config(SAMPLES / "square_mesh_file.json")
        with pytest.raises(ConfigError, match="rectangular domains") as excinfo:
            convergence_levels(config, h_list=(0.5, 0.25))
        assert excinfo.value.pointer == "/convergence/h_list"
