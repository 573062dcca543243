import pytest

from scorerec.config import RunConfig, load_config
from scorerec.errors import ConfigError


def test_defaults():
    c = RunConfig().validate()
    assert (c.k_c, c.k_e, c.k_s, c.tau_car, c.tau_sare) == (5, 10, 2, 0.1, 0.02)
    assert (c.rank_threshold, c.neg_count, c.batch_size, c.dim, c.max_items) == (5, 3, 16, 256, 15)


def test_sections_flatten_and_overrides_win(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[car]\ntau_car = 0.2\nk_c = 3\n[inference]\nk_s = 1\n')
    c = load_config(p, {"k_s": "0", "seed": 9})
    assert (c.tau_car, c.k_c, c.k_s, c.seed) == (0.2, 3, 0, 9)


@pytest.mark.parametrize("key,value", [
    ("tau_car", 0), ("tau_sare", -1), ("k_c", 0), ("k_e", 0), ("k_s", -1), ("provider", "magic"),
    ("crm_mode", "x"), ("seed", "abc"), ("bogus", 1),
])
def test_validation_names_field(key, value):
    with pytest.raises(ConfigError) as e:
        load_config(None, {key: value})
    assert e.value.field == key


def test_bad_toml_and_non_integer(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("k_c = [\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError) as e:
        load_config(None, {"k_c": 2.5})
    assert e.value.field == "k_c"


def test_digest_ignores_paths():
    a = RunConfig(artifacts_dir="x")
    b = RunConfig(artifacts_dir="y", crm_path="z")
    assert a.digest() == b.digest()
    assert a.digest() != RunConfig(seed=1).digest()
