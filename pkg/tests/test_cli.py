import csv
import io
import json

import numpy as np
import pytest

from diracinv import formats
from diracinv.cli import main, synthesize
from diracinv.spectra import EigenRecord, SpectralData
from oracles import const_alpha, const_eigenvalues


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def _write(path, obj):
    formats.write_json(str(path), obj)
    return str(path)


def test_direct_on_zero_potential(tmp_path, capsys):
    pot = _write(tmp_path / "zero.json", formats.potential_to_json(synthesize("zero", n=64)))
    out = str(tmp_path / "data.json")
    assert main(["direct", pot, "--n-max", "3", "--out", out]) == 0
    table = capsys.readouterr().out.split("\n\n")[0]
    rows = _rows(table)
    assert rows[0][:3] == ["j", "window", "lambda"]
    assert len(rows) - 1 == 7
    data = formats.read_spectral_data(out)
    assert np.abs(data.lambdas - np.pi * np.arange(-3, 4)).max() < 1e-8


def test_direct_constant_matches_closed_form(tmp_path, capsys):
    pot = _write(tmp_path / "c.json", formats.potential_to_json(synthesize("constant", n=256, value=0.4)))
    out = str(tmp_path / "data.json")
    assert main(["direct", pot, "--n-max", "2", "--out", out]) == 0
    data = formats.read_spectral_data(out)
    expect = const_eigenvalues(0.4, 2)
    assert np.abs(data.lambdas - expect).max() < 1e-6
    for rec in data.records:
        assert abs(rec.alpha[0, 0] - const_alpha(0.4, rec.lam)) < 1e-6


def test_malformed_input_exit_2_with_locator(tmp_path, capsys):
    obj = formats.spectral_data_to_json(SpectralData.free(1, 2))
    obj["records"][1]["alpha"] = [[[1.0]]]
    bad = _write(tmp_path / "bad.json", obj)
    assert main(["reconstruct", bad, "--n-max", "2", "--grid", "32"]) == 2
    assert "records[1].alpha[0][0]" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{\"schema_version\": 1,")
    assert main(["validate", str(broken)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_reconstruct_free_data_is_zero(tmp_path, capsys):
    data = _write(tmp_path / "free.json", formats.spectral_data_to_json(SpectralData.free(2, 6)))
    out = str(tmp_path / "q.json")
    assert main(["reconstruct", data, "--n-max", "6", "--grid", "64", "--out", out]) == 0
    q = formats.read_potential(out)
    assert np.abs(q.samples).max() <= 1e-12
    rep = json.load(open(out + ".report.json"))
    assert rep["failed_stage"] is None and "timings" not in rep


def test_reconstruct_a3_violation_exit_3(tmp_path, capsys):
    d = SpectralData.free(1, 4)
    recs = [rec for rec in d.records if rec.window != 0] + [EigenRecord(0.0, 1e-8 * np.eye(1))]
    data = _write(tmp_path / "a3.json", formats.spectral_data_to_json(SpectralData(1, tuple(recs), 4)))
    out = str(tmp_path / "q.json")
    code = main(["reconstruct", data, "--n-max", "4", "--grid", "64", "--a1-bounds", "auto,auto,10", "--out", out])
    assert code == 3
    rep = json.load(open(out + ".report.json"))
    assert rep["failed_stage"] == "accelerant/check_a3"
    assert "accelerant/check_a3" in capsys.readouterr().err


def test_validate_pass_and_dropped_record(tmp_path, capsys):
    d = SpectralData.free(1, 5)
    good = _write(tmp_path / "g.json", formats.spectral_data_to_json(d))
    assert main(["validate", good, "--grid", "64"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r[:2] for r in rows[1:]] == [["A1", "True"], ["A2", "True"], ["A3", "True"]]
    bad = _write(tmp_path / "b.json", formats.spectral_data_to_json(d.replace(d.records[:3] + d.records[4:])))
    assert main(["validate", bad, "--skip-a3"]) == 3
    rows = _rows(capsys.readouterr().out)
    assert rows[2][:2] == ["A2", "False"]


def test_synthesize_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["synthesize", "random", "--r", "2", "--seed", "42", "--grid", "64", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    q = formats.read_potential(str(a))
    assert q.r == 2 and q.grid.n == 64


def test_file_round_trip_is_byte_exact(tmp_path):
    q = synthesize("random", r=2, n=32, seed=3)
    text = formats.dumps(formats.potential_to_json(q))
    p = tmp_path / "q.json"
    p.write_text(text)
    assert formats.dumps(formats.potential_to_json(formats.read_potential(str(p)))) == text
    d = SpectralData.from_arrays([0.1, 3.3], [np.eye(2) * 0.7, np.array([[1.0, 0.2j], [-0.2j, 0.5]])], 1)
    text = formats.dumps(formats.spectral_data_to_json(d))
    p.write_text(text)
    assert formats.dumps(formats.spectral_data_to_json(formats.read_spectral_data(str(p)))) == text


def test_reconstruct_with_reference(tmp_path, capsys):
    data = _write(tmp_path / "free.json", formats.spectral_data_to_json(SpectralData.free(1, 4)))
    ref = _write(tmp_path / "ref.json", formats.potential_to_json(synthesize("zero", n=64)))
    out = str(tmp_path / "q.json")
    assert main(["reconstruct", data, "--n-max", "4", "--grid", "64", "--reference", ref, "--out", out]) == 0
    err = capsys.readouterr().err
    assert "below_threshold,True" in err
    assert json.load(open(out + ".report.json"))["reference"]["below_threshold"] is True


def test_bad_flags_and_unknown_kind(tmp_path, capsys):
    data = _write(tmp_path / "free.json", formats.spectral_data_to_json(SpectralData.free(1, 2)))
    assert main(["reconstruct", data, "--grid", "64", "--accel-grid", "65"]) == 2
    with pytest.raises(SystemExit):
        main(["synthesize", "square"])
    with pytest.raises(ValueError):
        synthesize("square")
