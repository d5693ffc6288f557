import math
from dataclasses import dataclass

import pytest

from similoc.cli import filter_config, localize_config
from similoc.config import apply_overrides, load_config, parse_config
from similoc.errors import InputParseError
from similoc.particle_filter import FilterConfig


@dataclass(frozen=True)
class Knobs:
    n: int = 3
    x: float = 1.0
    on: bool = False
    pair: tuple = (1.0, 2.0)
    name: str = "a"
    opt: object = None


def test_parse_comments_and_blanks():
    cfg = parse_config("# header\n\nk.n = 4  # trailing\n  k.name=hello world \n")
    assert cfg == {"k.n": "4", "k.name": "hello world"}


def test_parse_rejects_garbage():
    with pytest.raises(InputParseError, match=":2:"):
        parse_config("k.n = 1\nnot a pair\n", "f.cfg")
    with pytest.raises(InputParseError):
        parse_config("= 3")


def test_overrides_coerce_by_field_type():
    cfg = parse_config("k.n = 7\nk.x = 2.5\nk.on = yes\nk.pair = 3, 4\nk.name = b\nk.opt = none\nother.n = 9")
    k = apply_overrides(Knobs(), cfg, "k")
    assert k == Knobs(7, 2.5, True, (3.0, 4.0), "b", None)


def test_overrides_degrees():
    k = apply_overrides(Knobs(), {"k.x": "90", "k.pair": "180 45"}, "k", degrees=("x", "pair"))
    assert k.x == math.pi / 2 and k.pair == (math.pi, math.pi / 4)


@pytest.mark.parametrize("cfg", [{"k.bogus": "1"}, {"k.n": "1.5"}, {"k.on": "maybe"}, {"k.pair": "1 2 3"}])
def test_overrides_errors(cfg):
    with pytest.raises(InputParseError):
        apply_overrides(Knobs(), cfg, "k")


def test_load_missing_file(tmp_path):
    with pytest.raises(InputParseError, match="cannot read"):
        load_config(tmp_path / "nope.cfg")


def test_filter_and_localize_sections():
    cfg = {"filter.sigma_x": "0.3", "filter.n": "50", "localize.update_every": "10", "align.accept": "0.8"}
    f = filter_config(cfg, FilterConfig())
    assert f.noise.sigma_x == 0.3 and f.n == 50
    lc = localize_config(cfg, "rgb")
    assert lc.mode == "rgb" and lc.update_every == 10 and lc.align_cfg.accept == 0.8 and lc.filter.n == 50 and lc.filter.motion_frame == "body"
    with pytest.raises(InputParseError):
        localize_config({"filter.sigma_q": "1"})
