import json

import pytest

from fsa_lab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_no_command_and_unknown_command(capsys):
    assert run(capsys)[0] == 1
    code, _, err = run(capsys, "frobnicate")
    assert code == 1 and "schema" in err.lower()


def test_bad_flag_and_bad_override(capsys):
    assert run(capsys, "solve", "--scheme", "XYZ")[0] == 1
    assert run(capsys, "solve", "--set", "geometry.bogus=1")[0] == 1
    assert run(capsys, "solve", "--set", "geometry.n_antennas=12")[0] == 1
    assert run(capsys, "solve", "--seed", "-3")[0] == 1


def test_missing_or_broken_config(capsys, tmp_path):
    assert run(capsys, "solve", "--config", str(tmp_path / "nope.json"))[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    code, _, err = run(capsys, "solve", "--config", str(bad))
    assert code == 1 and "invalid config" in err


def test_runtime_failure_exit_code(capsys, monkeypatch):
    import fsa_lab.cli as cli

    def boom(*a, **k):
        raise RuntimeError("synthetic")

    monkeypatch.setattr(cli, "fpa_solve", boom)
    assert run(capsys, "solve", "--scheme", "FPA")[0] == 2


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0


def test_nullsteer_same_angle(capsys, tmp_path):
    out = tmp_path / "ns.json"
    code, text, _ = run(capsys, "nullsteer", "--du", "0", "--dr", "45", "--n", "13", "--out", str(out))
    assert code == 0
    fields = dict(line.split(None, 1) for line in text.strip().splitlines())
    assert float(fields["delta_f_hz"]) == pytest.approx(3e8 / (13 * 45), rel=1e-9)
    assert float(fields["carrier_hz"]) == 60e9 and fields["feasible"].strip() == "true"
    assert json.loads(out.read_text())["feasible"] is True


def test_solve_fpa_writes_payload(capsys, tmp_path):
    out = tmp_path / "fpa.json"
    code, text, _ = run(capsys, "solve", "--scheme", "FPA", "--out", str(out))
    assert code == 0 and "secrecy_bps_hz" in text
    data = json.loads(out.read_text())
    assert data["scheme"] == "FPA" and len(data["weights"]) == 13


def test_sweep_power_rows_and_seed_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--var", "power", "--no-timing", "--seed", "7",
            "--set", "optimizer.multistart_count=2"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    assert run(capsys, *args, "--out", str(b))[0] == 0
    lines = a.read_text().splitlines()
    assert len(lines) == 1 + 16
    assert a.read_bytes() == b.read_bytes()


def test_sweep_variable_switch_uses_default_grid(capsys, tmp_path):
    out = tmp_path / "off.csv"
    code, _, _ = run(capsys, "sweep", "--var", "offset", "--set", "schemes=[\"FPA\"]",
                     "--out", str(out))
    assert code == 0
    values = [line.split(",")[0] for line in out.read_text().splitlines()[1:]]
    assert values == ["0", "1000000", "2000000", "4000000"]
    assert run(capsys, "sweep", "--var", "humidity")[0] == 1


def test_beamscan(capsys):
    code, text, _ = run(capsys, "beamscan", "--axis", "range", "--grid", "20:60:5",
                        "--ladder-step", "50e3")
    assert code == 0
    rows = text.strip().splitlines()
    assert rows[0] == "range_m,gain" and len(rows) == 6
    gain_at_bob = dict(r.split(",") for r in rows[1:])["40"]
    assert float(gain_at_bob) == pytest.approx(1.0, abs=1e-12)
    assert run(capsys, "beamscan", "--grid", "oops")[0] == 1


def test_converge_and_gradcheck(capsys):
    code, text, _ = run(capsys, "converge", "--sizes", "5", "--set", "optimizer.multistart_count=1")
    assert code == 0 and text.startswith("n_antennas,iteration,objective")
    assert run(capsys, "converge", "--sizes", "4")[0] == 1
    code, text, _ = run(capsys, "gradcheck", "--points", "3")
    assert code == 0
    errs = {line.split()[0]: float(line.split()[-1]) for line in text.strip().splitlines()}
    assert set(errs) == {"grad_fiv", "grad_carrier", "ma_positions"}
    assert max(errs.values()) < 1e-5
