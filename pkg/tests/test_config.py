import pytest

from fvdwr.config import build_objects, parse_config, run_settings
from fvdwr.errors import ConfigError


def _write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


MINIMAL = "[problem]\nname = p1_poisson\n\n[study]\nmode = uniform\nlevels = 4\n"


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL))
    assert cfg.problem == "p1_poisson"
    assert cfg.goal == "mean_value"
    assert cfg["discretization.scheme"] == "exponential"
    assert cfg["discretization.dual"] == "voronoi"
    assert cfg["verify.seed"] == 0
    assert cfg["study.levels"] == 4
    assert cfg["adaptive.theta"] == 0.5
    settings = run_settings(cfg)
    assert settings.dual_kind == "voronoi" and settings.scheme.name == "exponential"


def test_problem_and_goal_parameters(tmp_path):
    cfg = parse_config(_write(tmp_path, "[problem]\nname = p3_quasilinear\neps = 0.5\nw0 = none\n"
                                        "[goal]\nname = weighted_mean\nweight = gaussian\nx0 = 0.25\n"))
    assert cfg.problem_params == {"eps": 0.5, "w0": None}
    assert cfg.goal_params == {"weight": "gaussian", "x0": 0.25}
    problem, goal = build_objects(cfg)
    assert problem.params["eps"] == 0.5 and goal.params["x0"] == 0.25


@pytest.mark.parametrize(
    "text,key",
    [
        (MINIMAL + "[study]\n", None),  # duplicate section
        ("[problem]\nname = p1_poisson\nalpha = 1\n", "problem.alpha"),
        ("[problem]\nname = p1_poisson\n[discretization]\nflux = 1\n", "discretization.flux"),
        ("[problem]\nname = p1_poisson\n[colors]\nred = 1\n", "colors"),
        ("[problem]\nname = p7\n", "problem.name"),
        ("[study]\nlevels = 2\n", "problem.name"),
        ("[problem]\nname = p1_poisson\n[study]\nlevels = two\n", "study.levels"),
        ("[problem]\nname = p1_poisson\n[study]\nlevels = 0\n", "study.levels"),
        ("[problem]\nname = p1_poisson\n[adaptive]\ntheta = 1.5\n", "adaptive.theta"),
        ("[problem]\nname = p1_poisson\n[discretization]\ndual = box\n", "discretization.dual"),
        ("[problem]\nname = p1_poisson\n[discretization]\nscheme = magic\n", "discretization.scheme"),
        ("[problem]\nname = p1_poisson\n[goal]\nname = median\n", "goal.name"),
        ("[problem]\nname = p1_poisson\n[solver]\ndamping = maybe\n", "solver.damping"),
    ],
)
def test_schema_violations(tmp_path, text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(_write(tmp_path, text))
    if key is not None:
        assert info.value.key == key


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.ini")


def test_overrides_take_precedence(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL), {"study.levels": "2", "discretization.dual": "donald"})
    assert cfg["study.levels"] == 2
    assert cfg["discretization.dual"] == "donald"


def test_bad_override_key(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, MINIMAL), {"levels": "2"})


def test_scheme_parameter_checked(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL), {"discretization.scheme": "step", "discretization.scheme_m": "5"})
    with pytest.raises(ConfigError):
        run_settings(cfg)
