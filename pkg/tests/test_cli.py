from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import petmin.cli as cli
from petmin.analytic import NumericError
from petmin.cli import RunConfig, dumps, emit_plots, main, run

FAST = ["--outputs", "lambda_table,measures"]


def test_dumps_is_sorted_and_round_trips_floats():
    text = dumps({"b": [0.1, 1.0 / 3.0], "a": {"z": True, "y": None}})
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data["b"][1] == 1.0 / 3.0
    assert "0.10000000000000001" in text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps_float_round_trip(x):
    assert json.loads(dumps([x]))[0] == x


def test_run_writes_artifacts_via_toml_config(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'group = "Gamma1"\nk_range = [1, 3]\nout_dir = "{tmp_path / "out"}"\noutputs = ["lambda_table", "measures"]\n')
    assert main(["run", "--config", str(cfg)]) == 0
    lines = (tmp_path / "out" / "lambda_table.csv").read_text().splitlines()
    assert len(lines) == 1 + 1 + 2 + 3
    measures = json.loads((tmp_path / "out" / "measures.json").read_text())
    assert [m["k"] for m in measures["measures"]] == [1, 2, 3]
    assert measures["levy_k_k_plus_2"][0]["k"] == 1


def test_json_config_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k_min": 1, "k_max": 5, "outputs": ["lambda_table"]}))
    assert main(["run", "--config", str(cfg), "--k-max", "2", "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "lambda_table.csv").read_text().splitlines()
    assert rows[-1].startswith("Gamma1,2,2,")


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--group", "Gamma0(4)"],
        ["run", "--precision", "32"],
        ["run", "--k-min", "3", "--k-max", "2"],
        ["run", "--outputs", "lambda_table,bogus"],
        [],
    ],
)
def test_configuration_errors_exit_2(args, tmp_path, capsys):
    assert main(args + (["--out", str(tmp_path)] if args else [])) == 2


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("colour = 3\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_cache_from_environment(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("PETMIN_CACHE", str(cache))
    assert main(["run", "--k-max", "2", "--out", str(tmp_path / "o")] + FAST) == 0
    assert len(list(cache.glob("gram_Gamma1_k*_p128.json"))) == 2


def test_threads_give_identical_artifacts(tmp_path):
    base = dict(group="Gamma1", k_min=1, k_max=3, outputs=["lambda_table", "measures"])
    run(RunConfig(out_dir=tmp_path / "one", **base), log=lambda m: None)
    run(RunConfig(out_dir=tmp_path / "two", threads=2, **base), log=lambda m: None)
    for name in ("lambda_table.csv", "measures.json", "summary.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_numeric_failure_exits_3_with_location(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise NumericError("quadrature did not converge")

    monkeypatch.setattr(cli, "cached_gram", broken)
    assert main(["run", "--k-max", "2", "--out", str(tmp_path)] + FAST) == 3
    err = capsys.readouterr().err
    assert "stage=gram" in err and "group=Gamma1" in err and "k=1" in err


def test_path_disagreement_exits_4(tmp_path, monkeypatch, capsys):
    real = cli.filtration_profile

    def skewed(gram, *args, **kwargs):
        prof = real(gram, *args, **kwargs)
        return type(prof)(prof.thresholds, prof.dims, prof.generating_vectors, tuple(n + 1 for n in prof.norms2), prof.shift)

    monkeypatch.setattr(cli, "filtration_profile", skewed)
    assert main(["run", "--k-max", "1", "--out", str(tmp_path)] + FAST) == 4
    assert "stage=profile" in capsys.readouterr().err


def test_full_outputs_small_range(tmp_path):
    summary = run(RunConfig(k_min=1, k_max=3, out_dir=tmp_path, cache_dir=tmp_path / "cache"), log=lambda m: None)
    for name in ("bounds.json", "gromov.json", "constants.json", "summary.json"):
        assert (tmp_path / name).exists()
    assert summary["bounds_pass"]["quasi_filtration"] is True
    ledger = json.loads((tmp_path / "cache" / "constants_ledger.json").read_text())
    assert len(ledger) == 1


def test_gamma0_mixture_output(tmp_path):
    run(RunConfig(group="Gamma0(2)", k_min=1, k_max=1, out_dir=tmp_path, outputs=["mixture"]), log=lambda m: None)
    rows = json.loads((tmp_path / "mixture.json").read_text())
    assert rows[0]["d_prime"] == 2 and rows[0]["d_sub"] == 1 and rows[0]["identity_holds"]


def test_plots(tmp_path):
    out = tmp_path / "run"
    run(RunConfig(k_min=1, k_max=3, out_dir=out, outputs=["lambda_table", "measures"]), log=lambda m: None)
    written = emit_plots(out)
    names = {p.name for p in written}
    assert {"cdf.csv", "cdf.svg", "lambda_scatter.csv", "lambda_scatter.svg"} <= names
    assert (out / "cdf.svg").read_text().lstrip().startswith("<?xml")
    first = (out / "cdf.svg").read_bytes()
    emit_plots(out)
    assert (out / "cdf.svg").read_bytes() == first


def test_plots_on_empty_directory_fail(tmp_path, capsys):
    with pytest.raises(FileNotFoundError):
        emit_plots(tmp_path)
    assert main(["plots", str(tmp_path)]) == 2
