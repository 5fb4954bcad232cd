import numpy as np
import pytest

from curlfree.config import DEFAULT_TOLERANCES, ConfigExprError, load_config, parse_config
from curlfree.errors import ConfigError
from curlfree.fieldspec import write_grid
from curlfree.geometry import Annulus, StarDomain

DISC = """
dimension = 2
[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
[field]
components = ["x2", "x1"]
"""


def test_minimal_disc_defaults():
    cfg = parse_config(DISC)
    assert isinstance(cfg.domain, StarDomain)
    assert cfg.domain.star_ball.radius == 0.5
    assert cfg.rho.radius == pytest.approx(0.3)
    assert cfg.field_kind == "vector"
    assert cfg.tol == DEFAULT_TOLERANCES
    assert cfg.seed == 0 and cfg.probes == 50
    assert (cfg.quad.outer, cfg.quad.inner) == (24, 32)


def test_box_default_star_ball():
    cfg = parse_config("""
dimension = 2
[domain]
kind = "box"
lo = [0.0, 0.0]
hi = [2.0, 1.0]
""")
    assert cfg.domain.star_ball.radius == 0.25
    np.testing.assert_allclose(cfg.domain.star_ball.center, [1.0, 0.5])


def test_star_ball_outside_domain():
    with pytest.raises(ConfigError, match="star ball is not contained"):
        parse_config(DISC + """
[domain.star_ball]
center = [0.8, 0.0]
radius = 0.5
""")


def test_rho_outside_star_ball():
    with pytest.raises(ConfigError, match="rho"):
        parse_config(DISC + "[rho]\ncenter = [0.4, 0.0]\nradius = 0.3\n")


def test_malformed_expression_offsets():
    text = DISC.replace('["x2", "x1"]', '["x2", "x1 * (x2 + 1"]')
    with pytest.raises(ConfigExprError) as err:
        parse_config(text)
    e = err.value
    assert e.key == "field.components[1]"
    assert e.offset == 12
    start = text.encode().index(b"x1 * (x2 + 1")
    assert e.file_offset == start + 12
    assert f"file byte {start + 12}" in str(e)


def test_unknown_keys():
    with pytest.raises(ConfigError, match="colour: unknown key"):
        parse_config('colour = "red"\n' + DISC)
    with pytest.raises(ConfigError, match="tolerances.speed"):
        parse_config(DISC + "[tolerances]\nspeed = 1.0\n")


def test_wrong_types():
    with pytest.raises(ConfigError, match="dimension: expected"):
        parse_config(DISC.replace("dimension = 2", 'dimension = "two"'))
    with pytest.raises(ConfigError, match="seed"):
        parse_config("seed = -1\n" + DISC)
    with pytest.raises(ConfigError, match="must be positive"):
        parse_config(DISC + "[tolerances]\ncurl = 0.0\n")


def test_not_toml():
    with pytest.raises(ConfigError, match="not valid TOML"):
        parse_config("dimension = = 2")


def test_field_exactly_one_source():
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(DISC + 'expr = "x1"\n')


def test_annulus_needs_cover_flag():
    cfg = parse_config("""
dimension = 2
[domain]
kind = "annulus"
center = [0.0, 0.0]
inner = 0.5
outer = 1.5
[cover]
simply_connected = false
ring = { center = [0.0, 0.0], radius = 1.0, count = 8, ball_radius = 0.55 }
""")
    assert isinstance(cfg.domain, Annulus)
    assert len(cfg.cover) == 8
    assert not cfg.cover.simply_connected
    assert cfg.rho is None


def test_disconnected_cover():
    with pytest.raises(ConfigError, match="disconnected|ordering"):
        parse_config(DISC + """
[cover]
balls = [{ center = [0.0, 0.0], radius = 0.3 }, { center = [0.9, 0.0], radius = 0.3 }]
""")


def test_grid_field_relative_path(tmp_path):
    x = np.linspace(-1, 1, 9)
    X, Y = np.meshgrid(x, x, indexing="ij")
    write_grid(tmp_path / "gx.cfgr", 2 * X, [-1, -1], 0.25)
    write_grid(tmp_path / "gy.cfgr", 0 * Y, [-1, -1], 0.25)
    cfg_path = tmp_path / "rough.toml"
    cfg_path.write_text(DISC.replace('components = ["x2", "x1"]', 'grid = ["gx.cfgr", "gy.cfgr"]'))
    cfg = load_config(cfg_path)
    assert cfg.field.components == 2
    np.testing.assert_allclose(cfg.field(np.array([0.5, 0.0])), [1.0, 0.0])


def test_missing_grid_file(tmp_path):
    cfg_path = tmp_path / "bad.toml"
    cfg_path.write_text(DISC.replace('components = ["x2", "x1"]', 'grid = "nope.cfgr"'))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(cfg_path)


def test_rough_schedule_validation():
    with pytest.raises(ConfigError, match="rough.lam"):
        parse_config(DISC + "[rough]\nlam = [1.1, 1.2]\nl = [4, 8]\n")


def test_homotopy_paths_must_share_endpoints():
    with pytest.raises(ConfigError, match="share both end points"):
        parse_config(DISC + "[homotopy]\npaths = [[[0, 0], [0.5, 0.5]], [[0, 0], [0.5, 0.4]]]\n")


def test_with_seed_copies():
    cfg = parse_config(DISC)
    other = cfg.with_seed(9)
    assert other.seed == 9 and cfg.seed == 0


def test_shipped_configs_load():
    import pathlib

    for path in sorted(pathlib.Path(__file__).parent.parent.joinpath("configs").glob("*.toml")):
        load_config(path)
