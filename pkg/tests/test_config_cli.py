"""Configuration parsing, result files and the command-line interface."""
import copy
import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from shsaw.cell import Circle, Layer
from shsaw.cli import main
from shsaw.config import ResultBundle, format_float, load_config, parse_config
from shsaw.dispersion import DispersionSample
from shsaw.errors import ConfigError
from shsaw.scan import Branch

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "lattice": {"a1": 1.0, "a2": 2.0},
    "materials": {"epoxy": {"mu": 1.48, "rho": 1.14}, "steel": {"mu": 80.0, "rho": 7.8}},
    "background": "epoxy",
    "inclusions": [{"type": "circle", "center": [0.5, 1.5], "radius": 0.45, "material": "steel"}],
    "grid": {"k1_min": 0.1, "k1_max": 1.0, "n_k": 3, "omega_max": 2.0, "n_omega": 5},
    "solver": {"d": 3, "riccati_steps": 64, "riccati_max_steps": 4096},
}


def variant(**patch):
    raw = copy.deepcopy(BASE)
    for path, value in patch.items():
        node = raw
        keys = [int(k) if k.isdigit() else k for k in path.split("__")]
        for key in keys[:-1]:
            node = node[key]
        if value is ...:
            del node[keys[-1]]
        else:
            node[keys[-1]] = value
    return raw


def write_cfg(tmp_path, raw, name="run.cfg"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.grid is not None
    assert cfg.settings.d % 2 == 1
    assert len(cfg.digest) == 64


class TestParse:
    def test_builds_cell_and_settings(self):
        cfg = parse_config(variant())
        assert cfg.cell.lattice.a2 == 2.0
        assert isinstance(cfg.cell.inclusions[0], Circle)
        assert cfg.settings.d == 3
        assert cfg.settings.seed == 0
        assert cfg.failure_quota == 0.05
        assert cfg.k1_speed_limit == pytest.approx(0.15 * math.pi)

    def test_layer_and_flip(self):
        raw = variant(inclusions=[{"type": "layer", "z_lo": 0.0, "z_hi": 0.5, "material": "steel"}], flip=True)
        cfg = parse_config(raw)
        assert isinstance(cfg.cell.inclusions[0], Layer)
        assert cfg.cell.flipped

    @pytest.mark.parametrize(
        "raw, where",
        [
            (variant(lattice__a1=-1.0), "lattice/a1"),
            (variant(background="glass"), "background"),
            (variant(inclusions__0__material="glass"), "inclusions/0/material"),
            (variant(inclusions=[{"type": "layer", "z_lo": 1.0, "z_hi": 0.5, "material": "steel"}]), "inclusions/0"),
            (variant(solver__d=4), "solver/d"),
            (variant(solver__contour_radius=1.0), "solver/contour_radius"),
            (variant(solver__bogus=1), "solver"),
            (variant(grid__k1_max=10.0), "grid"),
            (variant(check={"d": 2}), "check/d"),
            (variant(lattice=...), "<root>"),
        ],
    )
    def test_rejects_with_field_path(self, raw, where):
        with pytest.raises(ConfigError) as info:
            parse_config(raw)
        assert str(info.value).startswith(where)

    def test_seed_override(self):
        assert parse_config(variant(), seed_override="42").settings.seed == 42
        with pytest.raises(ConfigError, match="SHSAW_SEED"):
            parse_config(variant(), seed_override="x")

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SHSAW_SEED", "9")
        assert load_config(write_cfg(tmp_path, variant())).settings.seed == 9

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.cfg")
        bad = tmp_path / "bad.cfg"
        bad.write_text("{\n  \"lattice\": ,\n}")
        with pytest.raises(ConfigError, match=r"bad.cfg:2:"):
            load_config(bad)
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="top level"):
            load_config(bad)

    def test_digest_ignores_key_order(self):
        raw = variant()
        reordered = dict(reversed(list(raw.items())))
        assert parse_config(raw).digest == parse_config(reordered).digest


def test_format_float():
    assert format_float(None) == "nan"
    assert format_float(float("nan")) == "nan"
    text = format_float(math.pi)
    assert float(text) == math.pi
    assert len(text.split("e")[0].replace(".", "")) == 17


def test_bundle_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    samples = [
        DispersionSample(omega=float(w), k1=0.5, d_saw=float(rng.random()), d_d3=float(rng.random()),
                         n_p=None if i == 2 else 2 * (i % 2), d_i=float(rng.random()),
                         trace_p=float(rng.random()), indeterminate=i == 2, contour_retry_count=i % 2,
                         alpha_retry_count=0, failed=i == 3)
        for i, w in enumerate(np.linspace(0, 1, 5))
    ]
    branches = [Branch("surface", [(0.1, 0.2), (0.2, 0.4)], [1e-9, 2e-9])]
    transonic = [Branch("transonic", [(0.1, 0.21), (0.2, 0.42)], [0.0, 0.0])]
    roots = [{"k1": 0.1, "omega": 0.2, "kind": "surface", "source": "d3", "d_saw": 1e-9, "d_i": 0.5,
              "bracket": 1e-7}]
    bundle = ResultBundle(samples, branches, transonic, {"c_saw": 2.0, "c_tr": 2.1, "ratio": 0.95},
                          {"seed": 1}, roots)
    out = bundle.save(tmp_path / "out")
    back = ResultBundle.load(out)
    assert back.samples == samples
    assert [(b.kind, b.points, b.quality) for b in back.branches] == [
        (b.kind, b.points, b.quality) for b in branches
    ]
    assert back.roots == roots
    assert back.speeds == bundle.speeds
    summary = json.loads((out / "summary.json").read_text())
    assert summary["counts"]["flagged"] == 1
    assert summary["counts"]["surface_branches"] == 1


class TestCli:
    def test_column_writes_rows(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, variant())
        out = tmp_path / "col.csv"
        assert main(["column", "--config", str(cfg), "--k1", "0.5", "--out", str(out)]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5
        assert rows[0]["n_p"] == "0"
        assert float(rows[0]["d_d3"]) == 1.0
        assert "5 rows" in capsys.readouterr().out

    def test_column_with_zero_height_range_is_empty(self, tmp_path):
        cfg = write_cfg(tmp_path, variant(grid__omega_min=1.0, grid__omega_max=1.0))
        out = tmp_path / "col.csv"
        assert main(["column", "--config", str(cfg), "--k1", "0.5", "--out", str(out)]) == 0
        assert out.read_text().strip() == "omega,n_p,d_saw,d_d3,flags"

    def test_column_reports_transonic_points(self, tmp_path, capsys):
        raw = variant(inclusions=[], grid__omega_max=1.5, grid__n_omega=7)
        cfg = write_cfg(tmp_path, raw)
        assert main(["column", "--config", str(cfg), "--k1", "0.5", "--roots",
                     "--out", str(tmp_path / "c.csv")]) == 0
        text = capsys.readouterr().out
        assert "transonic" in text and "N_p 0->2" in text

    def test_column_rejects_k1_outside_zone(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, variant())
        assert main(["column", "--config", str(cfg), "--k1", "4.0"]) == 2
        assert "--k1" in capsys.readouterr().err

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, variant(solver__d=4))
        assert main(["scan", "--config", str(cfg)]) == 2
        assert "solver/d" in capsys.readouterr().err

    def test_scan_homogeneous(self, tmp_path, capsys):
        raw = variant(inclusions=[], grid={"k1_min": 0.2, "k1_max": 1.0, "n_k": 3, "omega_max": 2.5,
                                           "n_omega": 6})
        cfg = write_cfg(tmp_path, raw)
        out = tmp_path / "scan"
        assert main(["scan", "--config", str(cfg), "--out", str(out)]) == 0
        bundle = ResultBundle.load(out)
        assert len(bundle.samples) == 18
        assert not bundle.branches
        assert len(bundle.transonic) == 1
        assert bundle.provenance["config_sha256"] == load_config(cfg).digest
        assert "surface branches: 0" in capsys.readouterr().out

    def test_scan_failure_quota(self, tmp_path, monkeypatch):
        from shsaw import cli

        real = cli.analyze_grid

        def flag_everything(*args, **kwargs):
            columns = real(*args, **kwargs)
            for c in columns:
                c.samples[:] = [DispersionSample(**{**s.__dict__, "failed": True}) for s in c.samples]
            return columns

        monkeypatch.setattr(cli, "analyze_grid", flag_everything)
        raw = variant(inclusions=[], grid={"k1_min": 0.2, "k1_max": 1.0, "n_k": 2, "omega_max": 1.0,
                                           "n_omega": 3})
        cfg = write_cfg(tmp_path, raw)
        assert main(["scan", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 3

    def test_check_passes_and_fails_on_radius(self, tmp_path, capsys):
        raw = variant(inclusions=[], check={"d": 3, "points": [[2.0, 0.7]], "n_random": 1, "steps": 512})
        cfg = write_cfg(tmp_path, raw)
        report = tmp_path / "check.json"
        assert main(["check", "--config", str(cfg), "--json", str(report)]) == 0
        doc = json.loads(report.read_text())
        assert doc["ok"] and len(doc["reports"]) == 1
        assert main(["check", "--config", str(cfg), "--contour-radius", "1.0", "--json", str(report)]) == 1
        assert not json.loads(report.read_text())["ok"]
        assert "overall: FAIL" in capsys.readouterr().out
