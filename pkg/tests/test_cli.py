import filecmp
import json
import math
import os

import numpy as np
import pytest
import yaml

from szegolab.cli import main, read_charges, read_states, sweep_cell, sweep_phase_diagram
from szegolab.config import ConfigError, parse_complex, parse_config
from szegolab.kernels import KernelSpec
from szegolab.manifold import threshold_x0
from szegolab.state import charges

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def write(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", cfg, "--out", str(out), *extra])


def test_minimal_config(tmp_path):
    cfg = write(tmp_path, {"kernel": {"family": "Szego"}, "nmax": 8, "initial": {"modes": [0, [0.3, 0.4]]},
                           "controls": {"t_end": 2.0, "checkpoint_dt": 0.5}})
    assert run("simulate", cfg, tmp_path / "o") == 0
    ch = read_charges(tmp_path / "o" / "charges.csv")
    for k in ("N", "E", "H"):
        assert np.ptp(ch[k]) <= 1e-10 * abs(ch[k][0])
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["termination"] == "ReachedTEnd"
    assert man["version"].startswith("0.1.0")


def test_blowup_manifest(tmp_path):
    out = tmp_path / "o"
    doc = yaml.safe_load(open(os.path.join(CONFIGS, "blowup_family.yaml")))
    doc["controls"]["t_end"] = 0.5
    assert run("simulate", write(tmp_path, doc), out) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["veff"]["regime"] == "InfiniteTimeBlowup"
    assert man["veff"]["category"] == "Exponential"
    E = man["veff"]["E"]
    # truncated kernel, b=1, p=1/2, lambda=0: omega^2 = -c4 (1-c)(1-x_m) with c4 = -7E^2/4
    assert man["veff"]["omega"] > 0
    assert man["config"]["kernel"] == {"family": "Truncated"}
    assert math.isfinite(E)


def test_two_variants_error(tmp_path, capsys):
    cfg = write(tmp_path, {"kernel": {"family": "Szego"}, "nmax": 8,
                           "initial": {"modes": [1.0], "stationary": {"p": 0.5}}})
    assert run("simulate", cfg, tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "initial.modes" in err and "initial.stationary" in err


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"kernel": {"family": "Nope"}, "nmax": 8, "initial": {"modes": [1]}}, "kernel"),
        ({"kernel": {"family": "Szego"}, "nmax": 8, "initial": {"modes": [1]}, "controls": {"rel_tol": -1}}, "controls"),
        ({"kernel": {"family": "Szego"}, "nmax": 8, "initial": {"stationary": {"p": 1.5}}}, "initial.stationary.p"),
        ({"kernel": {"family": "Szego"}, "nmax": 8, "initial": {"modes": [1]}, "extra": 1}, "extra"),
        ({"kernel": {"family": "Szego"}, "nmax": 2, "initial": {"modes": [1, 2, 3]}, "diagnostics": {"modes": [0]}}, "initial.modes"),
        ({"kernel": {"family": "Szego"}, "nmax": 8}, "initial"),
    ],
)
def test_config_errors_name_field(doc, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc, need_initial=True)
    assert exc.value.path == path


def test_parse_complex_forms():
    for v in (1.5, [1.5, 0], {"re": 1.5}, "1.5+0j"):
        assert parse_complex(v, "x") == 1.5
    assert parse_complex("1 - 2j", "x") == 1 - 2j
    with pytest.raises(ConfigError):
        parse_complex(True, "x")


def test_example_configs_parse():
    for name in sorted(os.listdir(CONFIGS)):
        doc = yaml.safe_load(open(os.path.join(CONFIGS, name)))
        cfg = parse_config(doc, need_initial="sweep" not in doc)
        if cfg.initial is not None:
            assert cfg.initial_state().nmax == cfg.nmax


def test_exit_codes(tmp_path):
    underflow = write(tmp_path, {"kernel": {"family": "Szego"}, "nmax": 8, "initial": {"modes": [1.0]},
                                 "controls": {"t_end": 1.0, "max_step": 1e-300}})
    assert run("simulate", underflow, tmp_path / "u") == 3
    assert main(["tail-fit", "--out", str(tmp_path / "t")]) == 2
    small = write(tmp_path, {"kernel": {"family": "Szego"}, "nmax": 16, "initial": {"modes": [1.0]},
                             "controls": {"t_end": 0.5, "checkpoint_dt": 0.1}}, "small.yaml")
    assert run("simulate", small, tmp_path / "s") == 0
    assert main(["tail-fit", "--input", str(tmp_path / "s"), "--out", str(tmp_path / "t")]) == 4
    assert main(["simulate", "--config", small, "--out", str(tmp_path / "x"), "--threads", "0"]) == 2


def test_deterministic_and_round_trip(tmp_path):
    doc = yaml.safe_load(open(os.path.join(CONFIGS, "l1.yaml")))
    doc["controls"] = {"t_end": 1.0, "checkpoint_dt": 0.25}
    cfg = write(tmp_path, doc)
    assert run("simulate", cfg, tmp_path / "a", "--seed", "7") == 0
    assert run("simulate", cfg, tmp_path / "b", "--seed", "7") == 0
    files = sorted(os.listdir(tmp_path / "a"))
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    assert mismatch == [] and errors == []
    spec = KernelSpec.from_dict(doc["kernel"])
    times, states = read_states(tmp_path / "a" / "states.csv")
    ch = read_charges(tmp_path / "a" / "charges.csv")
    np.testing.assert_array_equal(times, ch["t"])
    for i, a in enumerate(states):
        c = charges(spec, a)
        for k in ("N", "E", "H", "wiener", "tail_mass"):
            assert getattr(c, k) == pytest.approx(ch[k][i], rel=1e-12, abs=1e-300)
        for s, v in c.sobolev.items():
            assert v == pytest.approx(ch[f"H^{s:g}"][i], rel=1e-12)


def test_all_subcommands(tmp_path):
    sim = tmp_path / "sim"
    doc = yaml.safe_load(open(os.path.join(CONFIGS, "blowup_family.yaml")))
    doc["controls"]["t_end"] = 2.0
    doc["controls"]["checkpoint_dt"] = 0.1
    cfg = write(tmp_path, doc)
    assert run("simulate", cfg, sim) == 0
    assert run("manifold", cfg, tmp_path / "man") == 0
    rows = (tmp_path / "man" / "manifold.csv").read_text().splitlines()
    t, x, xa = (float(v) for v in rows[-1].split(",")[:3])
    assert abs(x - xa) < 1e-7
    assert run("lax-check", cfg, tmp_path / "lax") == 0
    lax_rows = (tmp_path / "lax" / "lax.csv").read_text().splitlines()[1:]
    assert max(float(r.split(",")[1]) for r in lax_rows) < 1e-9
    assert main(["rates", "--input", str(sim), "--out", str(tmp_path / "r"), "--config", cfg]) == 0
    assert main(["tail-fit", "--input", str(sim / "states.csv"), "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "blowup.json").exists()


def test_sweep_examples():
    for x0 in (0.01, 0.3, 0.9):
        assert sweep_cell(-1.0, x0, 0.0, 1.0)[0] == "Bounded"
    assert sweep_cell(4.0, 0.04, 0.0, 1.0)[0] == "Exponential"
    for beta in (16.5, 20.0, 25.0, 36.0):
        assert sweep_cell(beta, threshold_x0(beta, "Zero"), 0.0, 1.0)[0] == "Polynomial"


def test_sweep_threads_match(tmp_path):
    grid_b = np.linspace(-1, 20, 6)
    grid_x = np.linspace(0.05, 0.9, 5)
    assert sweep_phase_diagram(grid_b, grid_x, threads=1) == sweep_phase_diagram(grid_b, grid_x, threads=2)
    cfg = write(tmp_path, {"kernel": {"family": "Beta", "beta": 1.0},
                           "sweep": {"beta_grid": [-1.0, 4.0], "x0_grid": [0.04, 0.5]}})
    assert run("sweep", cfg, tmp_path / "a") == 0
    assert run("sweep", cfg, tmp_path / "b") == 0
    assert (tmp_path / "a" / "phase.csv").read_bytes() == (tmp_path / "b" / "phase.csv").read_bytes()
