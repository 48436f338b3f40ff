import subprocess
import sys

import pytest
import toml
from hypothesis import given
from hypothesis import strategies as st

from frontrecon.cli import dump_config, load_config, main, normalize
from frontrecon.errors import ConfigError


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def report(out):
    return dict(line.split(" = ", 1) for line in (out / "report.txt").read_text().splitlines() if " = " in line)


REFERENCE_FEATURES = """
[obstruction]
mode = "constant"
k_o = 1.0
[obstruction.features]
ubar = 0.3333333333333333
a = 0.0
b = 2.0
t_a = 0.5
v_o = 0.8333333333333334
sigma_a = -0.16666666666666666
t_b = 0.66
sigma_b = 0.5
"""


def test_obstruction_from_stated_features(tmp_path):
    out = tmp_path / "out"
    assert main(["reconstruct-obstruction", str(write(tmp_path, REFERENCE_FEATURES)), "-o", str(out)]) == 0
    r = report(out)
    assert abs(float(r["k1"]) - 5 / 9) <= 1e-12
    assert abs(float(r["xi1"]) - 1 / 12) <= 1e-12 and abs(float(r["xi2"]) - 1.67) <= 1e-12
    assert (out / "coefficient.csv").exists()


def test_flat_simulation(tmp_path):
    cfg = write(tmp_path, "[initial]\nvalues = [0.25]\n[run]\nT = 1.0\ntrace_points = [0.0]\n")
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    assert (out / "snapshot_0.csv").read_text() == "x,u_left,u_right\n"
    assert (out / "trace_0.csv").read_text().splitlines()[0] == "t,u_left,u_right"


def test_simulation_is_deterministic(tmp_path):
    text = ("[coefficient]\nbreakpoints = [0.5]\nvalues = [1.0, 0.6]\n[initial]\nbreakpoints = [0.0, 1.0]\n"
            "values = [0.1, 0.7, 0.2]\n[run]\nT = 2.0\ndelta = 0.01\ntrace_points = [0.5, 2.0]\n")
    cfg = write(tmp_path, text)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    for name in ("snapshot_0.csv", "trace_0.csv", "trace_1.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_coefficient_pipeline_and_verify(tmp_path):
    cfg = write(tmp_path, "[coefficient]\nbreakpoints = [0.2, 0.5, 0.8]\nvalues = [1.0, 0.6, 0.8, 0.7]\n"
                          "[run]\nT = 0.05\n[probe]\nJ = [0.0, 1.0]\nk_bound = 1.0\n")
    out = tmp_path / "out"
    assert main(["reconstruct-k", str(cfg), "-o", str(out)]) == 0
    r = report(out)
    assert [float(r[f"value {i}: k"]) for i in range(4)] == pytest.approx([1.0, 0.6, 0.8, 0.7], abs=1e-10)
    vout = tmp_path / "v"
    assert main(["verify", str(cfg), "-o", str(vout), "--reconstruction", str(out / "coefficient.csv")]) == 0
    line = (vout / "report.txt").read_text().splitlines()[0]
    assert float(line.rsplit("=", 1)[1]) <= 1e-9


def test_flux_reconstruction_from_table(tmp_path):
    text = """
[flux_reconstruction]
oracle = "table"
u_lo = 0.0
u_hi = 1.0
nu = 2
T = 1.0
[[flux_reconstruction.snapshots]]
u_left = 0.0
u_right = 0.25
jumps = [[3.0, 0.0, 0.25]]
[[flux_reconstruction.snapshots]]
u_left = 0.25
u_right = 0.5
jumps = [[1.0, 0.25, 0.5]]
[[flux_reconstruction.snapshots]]
u_left = 0.5
u_right = 0.75
jumps = [[-0.8, 0.5, 0.75]]
[[flux_reconstruction.snapshots]]
u_left = 0.75
u_right = 1.0
jumps = [[-2.5, 0.75, 0.875]]
arcs = [[-2.5, 0.0, 0.875, 1.0, 2.25]]
"""
    out = tmp_path / "out"
    assert main(["reconstruct-f", str(write(tmp_path, text)), "-o", str(out)]) == 0
    r = report(out)
    assert abs(float(r["f(0.875)"]) - 39 / 80) <= 1e-15 and abs(float(r["f(1)"]) - 17 / 40) <= 1e-15


def test_missing_observation_writes_a_partial_report(tmp_path):
    text = ("[flux_reconstruction]\noracle = \"table\"\nu_lo = 0.0\nu_hi = 0.5\nnu = 1\n"
            "[[flux_reconstruction.snapshots]]\nu_left = 0.0\nu_right = 0.25\njumps = [[3.0, 0.0, 0.25]]\n")
    out = tmp_path / "out"
    assert main(["reconstruct-f", str(write(tmp_path, text)), "-o", str(out)]) == 5
    assert "f(0.25) = 0.75" in (out / "report.txt").read_text()


def test_illposed_command(tmp_path):
    text = ("[window]\na = 0.0\nb = 3.0\n[run]\nT = 20.0\ndelta = 0.001\n"
            "[illposed]\nfamily = \"swap\"\nxi_start = 0.3\nchis = [0.4, 0.6, 0.8]\nks = [0.3, 0.5, 0.8]\n")
    out = tmp_path / "out"
    assert main(["illposed", str(write(tmp_path, text)), "-o", str(out)]) == 0
    assert {p.name for p in out.iterdir()} >= {"base.csv", "swapped.csv", "certificate.csv", "report.txt"}


@pytest.mark.parametrize("text,field", [
    ("[run]\nT = \"long\"\n", "run.T"),
    ("[run]\nhorizon = 3\n", "run.horizon"),
    ("[flux]\nkind = \"cubic\"\n", "flux.kind"),
    ("[illposed]\nchis = [1.0]\n", "illposed.xi_start"),
    ("colour = 1\n", "colour"),
])
def test_schema_errors_name_the_field(tmp_path, capsys, text, field):
    assert main(["simulate", str(write(tmp_path, text)), "-o", str(tmp_path / "o")]) == 2
    assert field in capsys.readouterr().err


def test_horizon_too_short_exit(tmp_path):
    text = ("[coefficient]\nbreakpoints = [0.3, 0.7]\nvalues = [1.0, 0.5, 1.0]\n[initial]\nvalues = [0.0]\n"
            "[run]\nT = 1.0\n[window]\na = 0.0\nb = 1.0\n[obstruction]\nu_a = 0.0\n")
    assert main(["reconstruct-obstruction", str(write(tmp_path, text)), "-o", str(tmp_path / "o")]) == 3


def test_congestion_exit(tmp_path):
    # a jammed edge state leaves no capacity signal to read
    text = ("[coefficient]\nbreakpoints = [0.3, 0.7]\nvalues = [1.0, 0.5, 1.0]\n[initial]\nvalues = [1.0]\n"
            "[run]\nT = 20.0\n[window]\na = 0.0\nb = 1.0\n[obstruction]\nu_a = 1.0\n")
    assert main(["reconstruct-obstruction", str(write(tmp_path, text)), "-o", str(tmp_path / "o")]) == 4


def test_stationary_obstruction_command(tmp_path):
    text = ("[coefficient]\nbreakpoints = [0.3, 0.7]\nvalues = [1.0, 0.5, 1.0]\n[initial]\nvalues = [0.0]\n"
            "[run]\nT = 40.0\n[window]\na = 0.0\nb = 1.0\n[obstruction]\nu_a = 0.0\n")
    out = tmp_path / "out"
    assert main(["reconstruct-obstruction", str(write(tmp_path, text)), "-o", str(out)]) == 0
    r = report(out)
    assert abs(float(r["k1"]) - 0.5) <= 1e-12 and abs(float(r["xi2"]) - 0.7) <= 1e-12


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "[initial]\nvalues = [0.25]\n")
    res = subprocess.run([sys.executable, "-m", "frontrecon.cli", "simulate", str(cfg), "-o", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "T = 1" in res.stdout


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[run\nT=1"))


# parse -> serialize -> parse is a fixed point

numbers = st.floats(-10, 10, allow_nan=False)
configs = st.fixed_dictionaries({
    "seed": st.integers(0, 1000),
    "run": st.fixed_dictionaries({"T": st.floats(0.01, 100), "delta": st.floats(1e-5, 0.1)}),
    "coefficient": st.fixed_dictionaries({"breakpoints": st.lists(numbers, max_size=4),
                                          "values": st.lists(st.floats(0.1, 3), min_size=1, max_size=5)}),
    "flux": st.fixed_dictionaries({"kind": st.sampled_from(["quadratic", "polynomial"]), "a": st.floats(0.1, 3)}),
    "probe": st.fixed_dictionaries({"J": st.lists(numbers, min_size=2, max_size=2)}),
})


@given(configs)
def test_config_round_trip(raw):
    once = normalize(raw)
    twice = normalize(toml.loads(dump_config(once)))
    assert twice == once
    assert normalize(toml.loads(dump_config(twice))) == twice
