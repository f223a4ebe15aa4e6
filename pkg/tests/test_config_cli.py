import hashlib
import json
import subprocess
import sys

import pytest

from afde.cli import run_command
from afde.config import config_hash, parse_config
from afde.errors import ConfigError
from afde.report import emit_report, read_json, write_svg
from afde.verify import ExperimentReport, PowerLawFit


def test_minimal_config_defaults():
    cfg = parse_config("[exponents]\nN = 1\nm = 0.5\n")
    assert cfg.exponents.m == (0.5,)
    assert cfg.solver.scheme == "explicit"
    assert cfg.solver.floor_rel == 1e-8
    assert cfg.grid.L == (10.0,) and cfg.grid.n == (200,)
    assert cfg.output.formats == ("json",)


def test_h2_violation_reported():
    with pytest.raises(ConfigError) as e:
        parse_config("[exponents]\nN = 3\nm = [0.1, 0.2, 0.3]\n")
    assert any("H2" in m and "0.6" in m for m in e.value.errors)


def test_duplicate_key_has_path():
    with pytest.raises(ConfigError) as e:
        parse_config("[exponents]\nm = [0.8, 0.4]\n[solver]\ntheta = 0.5\ntheta = 0.6\n")
    assert any("solver.theta" in m and "duplicate" in m for m in e.value.errors)


def test_unknown_keys_and_bad_values_all_reported():
    text = """
[exponents]
m = [0.8, 0.4]
[grid]
L = [4.0, 4.0]
n = [16, 15]
[solver]
scheme = "rk4"
thetta = 0.5
[output]
formats = ["json", "pdf"]
[bogus]
x = 1
"""
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    errs = "\n".join(e.value.errors)
    for needle in ("solver.thetta: unknown key", "bogus: unknown key", "output.formats"):
        assert needle in errs
    assert len(e.value.errors) >= 3


def test_experiment_block():
    cfg = parse_config("""
[exponents]
m = [0.8, 0.4]
[experiment]
name = "profile_tail"
ladder = [1.0, 2.0, 4.0]
[experiment.params]
collapse_tol = 0.05
""")
    p = cfg.experiment_params
    assert p.ladder == (1.0, 2.0, 4.0) and p.collapse_tol == 0.05 and p.m == (0.8, 0.4)
    with pytest.raises(ConfigError) as e:
        parse_config('[exponents]\nm = 0.5\n[experiment]\nname = "ghp"\n[experiment.params]\nnope = 1\n')
    assert any("experiment.params.nope" in m for m in e.value.errors)


def test_config_hash_canonical():
    a = parse_config("[exponents]\nm = [0.8, 0.4]\n[solver]\ntheta = 0.5\nbc = \"reflecting\"\n")
    b = parse_config("[solver]\nbc = \"reflecting\"\ntheta = 0.5\n[exponents]\nm = [0.8, 0.4]\n")
    assert a.sha256() == b.sha256()
    assert config_hash({"x": 1, "y": 2}) == config_hash({"y": 2, "x": 1})
    assert config_hash({"x": 1}) == hashlib.sha256(b'{"x":1}').hexdigest()


def test_cli_exit_codes(capsys):
    assert run_command(["similarity", "--m", "0.8", "0.4"]) == 0
    out = capsys.readouterr().out
    assert '"alpha": 1.666' in out and "0.4" in out and "0.6" in out
    assert run_command(["nope"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run_command([]) == 1
    assert run_command(["similarity", "--m", "0.1", "0.2", "0.3"]) == 1


def test_cli_eval_csv(capsys):
    assert run_command(["eval", "barenblatt_1d", "--m", "0.5", "--points", "0;1.7320508075688772"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x1,value"
    assert float(lines[2].split(",")[1]) == pytest.approx(0.25)
    assert run_command(["eval", "partition", "--m", "0.8", "0.4", "--points", "1,1"]) == 0
    assert run_command(["eval", "partition", "--m", "0.8", "0.4", "--points", "1"]) == 1


def test_cli_run_and_profile(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("""
[exponents]
m = 0.5
[grid]
L = 10.0
n = 100
[solver]
bc = "barrier-dirichlet"
snapshots = [1.1]
[run]
t0 = 1.0
t_end = 1.2
[profile]
mass = 1.0
""")
    assert run_command(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert sum(f.endswith(".csv") for f in files) == 3
    cfg2 = tmp_path / "p.toml"
    cfg2.write_text('[exponents]\nm = 0.5\n[grid]\nL = 20.0\nn = 200\n[solver]\nbc = "reflecting"\nfloor = 1e-14\n')
    assert run_command(["profile", "--config", str(cfg2), "--out", str(tmp_path / "p")]) == 0


def test_cli_numerical_failure_exit(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[exponents]\nm = 0.5\n[grid]\nL = 10.0\nn = 100\n[solver]\nbc = "reflecting"\nmax_steps = 3\n[run]\nt0 = 1.0\nt_end = 2.0\n')
    assert run_command(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_cli_verify_and_report(tmp_path, capsys):
    cfg = tmp_path / "iso.toml"
    cfg.write_text('[exponents]\nm = [0.5, 0.5]\n[experiment]\nname = "isotropic_profile"\n[experiment.params]\ncells = 64\n')
    assert run_command(["verify", "isotropic_profile", "--config", str(cfg), "--out", str(tmp_path), "--format", "csv"]) == 0
    js = [p for p in tmp_path.iterdir() if p.suffix == ".json"]
    assert len(js) == 1 and js[0].name.startswith("isotropic_profile-")
    d = read_json(js[0])
    assert d["schema_version"] == 1 and "config_sha256" in d and d["config"]["params"]["cells"] == 64
    assert run_command(["report", str(js[0])]) == 0
    # a failing criterion gives exit 3
    cfg.write_text('[exponents]\nm = [0.5, 0.5]\n[experiment]\nname = "isotropic_profile"\n[experiment.params]\ncells = 64\ntol = 1e-9\n')
    assert run_command(["verify", "isotropic_profile", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_verify_deterministic(tmp_path):
    cfg = tmp_path / "iso.toml"
    cfg.write_text('[exponents]\nm = [0.5, 0.5]\n[experiment]\nname = "isotropic_profile"\n[experiment.params]\ncells = 32\nhalf_extent = 6.0\n')
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert run_command(["verify", "isotropic_profile", "--config", str(cfg), "--out", str(out)]) in (0, 3)
        outs.append(next(out.glob("*.json")).read_bytes())
    assert outs[0] == outs[1]


def _toy_report():
    rep = ExperimentReport("smoothing", {"m": [0.5]})
    import numpy as np

    t = np.geomspace(1, 10, 6)
    rep.series["t"] = list(t)
    rep.series["sup"] = list(2 * t**-2.0)
    rep.fits["sup_slope"] = PowerLawFit(-2.0, np.log(2), 0.0, (1.0, 10.0), 6)
    rep.verdict("sup_slope", True, {"exponent": -2.0}, {"target": -2.0, "rel_tol": 0.05, "max_residual": 0.05})
    return rep.to_dict()


def test_emit_report_formats_and_round_trip(tmp_path):
    d = _toy_report()
    files = emit_report(d, tmp_path, "ab" * 32, ("json", "csv", "svg"))
    names = [f.name for f in files]
    assert names == ["smoothing-abababababab.json", "smoothing-abababababab.csv", "smoothing-abababababab.svg"]
    back = read_json(files[0])
    back.pop("config_sha256")
    assert ExperimentReport.from_dict(back).to_dict() == d
    svg1 = files[2].read_bytes()
    write_svg(d, tmp_path / "again.svg")
    assert (tmp_path / "again.svg").read_bytes() == svg1
    assert b"slope" in svg1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "afde.cli", "similarity", "--m", "0.5"], capture_output=True, text=True)
    assert r.returncode == 0 and "alpha" in r.stdout


def test_shipped_configs_parse():
    from pathlib import Path

    from afde.config import load_config

    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert paths
    for p in paths:
        load_config(p)
