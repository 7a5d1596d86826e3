import csv
import io
import math

import pytest

from prestrained_lattice import __version__
from prestrained_lattice.cli import run
from prestrained_lattice.config import ConfigError, parse_config

DEMO = """\
[domain]
type = box
lower = 0, 0
upper = 1, 1

[metric]
name = identity

[cutoff]
1 = 1.0

[run]
epsilons = 0.25, 0.125
resolution = 4
seed = 1
"""


def read_table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config-hash: ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def demo(tmp_path):
    p = tmp_path / "demo.cfg"
    p.write_text(DEMO)
    return p


def test_lattices_counts(capsys):
    code, out, _ = invoke(capsys, "lattices", "--radius-sq", "2", "--dim", "2")
    rows = read_table(out)
    assert code == 0 and rows[0]["orbit_size"] == "4" and rows[0]["family_count"] == "8"


def test_lattices_family_rows(capsys):
    code, out, _ = invoke(capsys, "lattices", "--radius-sq", "1", "--families")
    assert code == 0 and len(read_table(out)) == 4


def test_qw(capsys):
    code, out, _ = invoke(capsys, "qw", "--matrix", "2,0,0,2")
    row = read_table(out)[0]
    assert code == 0 and float(row["W"]) == 2.0 and float(row["QW"]) == 2.0


def test_qw_bad_matrix(capsys):
    code, _, err = invoke(capsys, "qw", "--matrix", "1,2,3")
    assert code == 2 and "error" in err


def test_study_identity_zero_column(capsys, demo, tmp_path):
    svg = tmp_path / "s.svg"
    code, out, _ = invoke(capsys, "study", "--config", str(demo), "--plot", str(svg))
    rows = read_table(out)
    assert code == 0
    assert [r["kind"] for r in rows] == ["discrete", "discrete", "extrapolated", "continuum"]
    assert all(abs(float(r["min_E"])) <= 1e-24 for r in rows)
    assert svg.read_text().startswith("<svg")


def test_outputs_byte_identical(demo, tmp_path):
    for cmd in ("represent", "study"):
        a, b = tmp_path / f"{cmd}_a.csv", tmp_path / f"{cmd}_b.csv"
        assert run([cmd, "--config", str(demo), "--output", str(a)]) == 0
        assert run([cmd, "--config", str(demo), "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert b"\r\n" in a.read_bytes()


def test_workers_env_does_not_change_output(demo, tmp_path, monkeypatch):
    cfg = tmp_path / "w.cfg"
    cfg.write_text(DEMO.replace("[metric]\nname = identity", "[metric]\nname = example2\nc = 0.3")
                   + "\n[deformation]\nname = linear\nm = 1.1, 0.2, 0, 0.9\nnoise = 0.2\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("PRESTRAINED_WORKERS", "1")
    assert run(["represent", "--config", str(cfg), "--output", str(a)]) == 0
    monkeypatch.setenv("PRESTRAINED_WORKERS", "3")
    assert run(["represent", "--config", str(cfg), "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_table(a.read_text())
    assert all(0 <= float(r["gap"]) <= float(r["bound"]) for r in rows)


def test_energy_and_minimize(capsys, demo):
    code, out, _ = invoke(capsys, "energy", "--config", str(demo))
    assert code == 0 and all(float(r["E"]) == 0.0 for r in read_table(out))
    code, out, _ = invoke(capsys, "minimize", "--config", str(demo))
    assert code == 0 and [r["target"] for r in read_table(out)] == ["discrete", "discrete"]


def test_curvature_example2(capsys, tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("[metric]\nname = example2\nw0 = 0.7853981633974483\nc = 0.1\n[run]\ngrid = 3\n")
    code, out, _ = invoke(capsys, "curvature", "--config", str(p))
    rows = read_table(out)
    assert code == 0 and len(rows) == 9
    for r in rows:
        assert float(r["kappa"]) == pytest.approx(float(r["kappa_ref"]), rel=1e-5)
        assert abs(float(r["kappa_bar"])) < 1e-6


def test_curvature_example1(capsys, tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("[metric]\nname = example1\ng0 = 3\ng1 = 1\n[run]\ngrid = 2\n")
    code, out, _ = invoke(capsys, "curvature", "--config", str(p))
    for r in read_table(out):
        assert abs(float(r["kappa"])) < 1e-6
        assert float(r["kappa_bar"]) == pytest.approx(float(r["kappa_bar_ref"]), rel=1e-5)


def test_config_unknown_key_reports_position(capsys, tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[run]\nepsilon = 0.1\nbogus = 1\n")
    code, _, err = invoke(capsys, "energy", "--config", str(p))
    assert code == 2 and "line 3, column 1" in err and "bogus" in err


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[nope]\na = 1\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("a = 1\n")
    cfg = parse_config("[run]\nepsilons = 0.1, 0.2\n")
    with pytest.raises(ConfigError, match="decreasing"):
        cfg.epsilons()
    cfg = parse_config("[run]\nepsilon = -1\n")
    with pytest.raises(ConfigError, match="line 2"):
        cfg.epsilons()
    with pytest.raises(ConfigError):
        parse_config("[metric]\nname = sphere\n").metric()
    with pytest.raises(ConfigError):
        parse_config("[cutoff]\nx = 1\n").cutoff()


def test_config_builders():
    cfg = parse_config("[domain]\ntype = polygon\nsides = 8\n[metric]\nname = constant\ng = 4, 0, 0, 1\n")
    dom = cfg.domain()
    assert dom.volume == pytest.approx(2 * math.sqrt(2))
    assert cfg.metric(2)([[0.1, 0.1]])[0].tolist() == [[4.0, 0.0], [0.0, 1.0]]
    assert cfg.digest() == parse_config("[metric]\nname = constant\ng = 4, 0, 0, 1\n"
                                        "[domain]\ntype = polygon\nsides = 8\n").digest()


def test_missing_config_file(capsys, tmp_path):
    code, _, err = invoke(capsys, "energy", "--config", str(tmp_path / "none.cfg"))
    assert code == 2 and "cannot read" in err


def test_version(capsys):
    with pytest.raises(SystemExit):
        run(["--version"])
    assert __version__ in capsys.readouterr().out
