import re
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from pulsequota.config import dump_config, load_config, parse_config
from pulsequota.exceptions import ConfigError
from pulsequota.rates import ConstantRate, GeneralizedLogistic, PiecewiseTable

SOURCE_TEXT = Path(__file__).resolve().parents[1] / "paper.md"

MINIMAL = """\
[growth]
kind = logistic
r0 = 1/9
K = 9000

[policy]
k_plus = 6000
q = 5000

[noise]
sigma = 1/3

[sim]
dt = 0.01
t_max = 100
"""


def test_bundled_logistic_config_carries_published_parameters():
    cfg = load_config("logistic")
    text = SOURCE_TEXT.read_text()
    # the published setup: rate, capacity, threshold, quota, noise and start
    assert re.search(r"r_\{0\}=1/9", text) and cfg.law.r0 == pytest.approx(1 / 9)
    assert "K=9000[ton]" in text and cfg.law.K == 9000.0
    assert "K^{+}=6000[ton]" in text and cfg.policy.k_plus == 6000.0
    assert "Q=5000[ton]" in text and cfg.policy.q == 5000.0
    assert "K_{-}=1000[ton]" in text and cfg.policy.k_minus == 1000.0
    assert r"\sigma=1/3" in text and cfg.noise.sigma == pytest.approx(1 / 3)
    assert "N(0)=1000[ton]" in text and cfg.start == 1000.0
    assert cfg.sim.seed == 42


def test_bundled_malthusian_config():
    cfg = load_config("malthusian")
    assert isinstance(cfg.law, ConstantRate) and cfg.law.r == pytest.approx(1 / 9)
    assert cfg.sim.base_dt == 0.01 and cfg.sim.max_closures == 1


def test_defaults_and_fractions():
    cfg = parse_config(MINIMAL)
    assert cfg.law == GeneralizedLogistic(1 / 9, 9000.0)
    assert cfg.sim.seed == 0 and cfg.sim.crossing_mode == "interpolate"
    assert cfg.paths == 1000 and cfg.n0 is None and cfg.start == 1000.0
    assert cfg.out == "out" and cfg.csv


def _error(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value


def test_unknown_key_reports_line_and_key():
    err = _error(MINIMAL.replace("q = 5000", "q = 5000\nquota = 3"))
    assert err.line == 9 and err.key == "quota" and "line 9" in str(err)


def test_unknown_section_rejected():
    err = _error(MINIMAL + "\n[extras]\nfoo = 1\n")
    assert err.section == "extras"


def test_missing_k_plus():
    err = _error(MINIMAL.replace("k_plus = 6000\n", ""))
    assert err.key == "k_plus"


def test_bad_number_reports_location():
    err = _error(MINIMAL.replace("sigma = 1/3", "sigma = one third"))
    assert err.line == 11 and err.key == "sigma"
    assert _error(MINIMAL.replace("dt = 0.01", "dt = 1/0")).key == "dt"
    assert _error(MINIMAL.replace("dt = 0.01", "dt = nan")).key == "dt"


def test_module_invariants_revalidated():
    assert _error(MINIMAL.replace("q = 5000", "q = 7000")).section == "policy"
    assert _error(MINIMAL.replace("k_plus = 6000", "k_plus = 9500")).key == "k_plus"
    assert _error(MINIMAL.replace("sigma = 1/3", "sigma = -1")).key == "sigma"
    assert _error(MINIMAL.replace("t_max = 100", "t_max = 100\nseed = -4")).section == "sim"
    assert _error(MINIMAL.replace("t_max = 100", "t_max = 100\nn0 = 7000")).key == "n0"
    assert _error(MINIMAL.replace("kind = logistic", "kind = gompertz")).key == "kind"
    assert _error(MINIMAL.replace("r0 = 1/9\n", "")).key == "r0"


def test_duplicate_key_rejected():
    err = _error(MINIMAL.replace("q = 5000", "q = 5000\nq = 4000"))
    assert err.line == 9


def test_table_law_resolves_relative_path(tmp_path):
    (tmp_path / "rates.csv").write_text("abundance,rate\n0,0.2\n50,0.1\n100,-0.1\n")
    text = MINIMAL.replace("kind = logistic\nr0 = 1/9\nK = 9000",
                           "kind = table\ntable = rates.csv")
    text = text.replace("k_plus = 6000\nq = 5000", "k_plus = 70\nq = 50")
    (tmp_path / "run.ini").write_text(text)
    cfg = load_config(tmp_path / "run.ini")
    assert isinstance(cfg.law, PiecewiseTable) and cfg.law.abundance == (0.0, 50.0, 100.0)
    again = parse_config(dump_config(cfg), tmp_path)
    assert again == cfg


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=80, deadline=None)
@given(r0=st.floats(1e-3, 10, **finite), k=st.floats(10, 1e6, **finite),
       mu=st.floats(1, 5, **finite), nu=st.floats(1, 5, **finite),
       kp_frac=st.floats(0.01, 0.99), q_frac=st.floats(0.01, 0.99),
       sigma=st.floats(0, 2, **finite), dt=st.floats(1e-5, 0.1, **finite),
       seed=st.integers(0, 2**64 - 1), stride=st.integers(1, 50),
       mode=st.sampled_from(["grid", "interpolate", "bridge"]),
       max_closures=st.one_of(st.none(), st.integers(1, 100)),
       paths=st.integers(1, 10**6), csv=st.booleans())
def test_round_trip_is_identity(r0, k, mu, nu, kp_frac, q_frac, sigma, dt, seed, stride, mode,
                                max_closures, paths, csv):
    kp = kp_frac * k
    lines = [
        "[growth]", f"r0 = {r0!r}", f"K = {k!r}", f"mu = {mu!r}", f"nu = {nu!r}",
        "[policy]", f"k_plus = {kp!r}", f"q = {q_frac * kp!r}",
        "[noise]", f"sigma = {sigma!r}",
        "[sim]", f"dt = {dt!r}", f"t_max = {dt * 1000!r}", f"seed = {seed}",
        f"record_stride = {stride}", f"crossing_mode = {mode}",
        f"n0 = {0.5 * kp!r}",
    ]
    if max_closures is not None:
        lines.append(f"max_closures = {max_closures}")
    lines += ["[ensemble]", f"paths = {paths}", "[io]", f"csv = {'yes' if csv else 'no'}"]
    cfg = parse_config("\n".join(lines))
    text = dump_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert dump_config(again) == text


def test_round_trip_constant_law():
    cfg = load_config("malthusian")
    assert parse_config(dump_config(cfg)) == cfg
    assert parse_config(dump_config(cfg)).law.r == 1 / 9
