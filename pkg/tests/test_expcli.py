"""Unit tests for the experiment registry, result cache, SVG rendering and CLI."""

import json
import math
import os

import numpy as np
import pytest

from heraldlab import cli
from heraldlab.experiments import (
    ARTIFACT_VERSION,
    EXPERIMENTS,
    ExperimentConfig,
    canonical_json,
    config_fingerprint,
    config_from_dict,
    load_config,
    run,
)
from heraldlab.render import render_svg, save_svg, write_atomic

FAST_BLOCKSIZE = {
    "experiment": "blocksize",
    "inputs": {"f_values": {"f1": [1.0, 1.0], "f_pot": [1.5, 1.25]}},
    "grid": {"lam": [0.0, 0.05, 0.5]},
}


def _config(tmp_path, **overrides) -> ExperimentConfig:
    data = dict(FAST_BLOCKSIZE, out_dir=str(tmp_path / "out"), **overrides)
    return config_from_dict(data)


class TestRender:
    SERIES = [([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], "up"),
              ([0.1, 0.2, 0.3], [3.0, 2.0, 1.0], "down")]
    STYLE = {"xlabel": "x", "ylabel": "y", "title": "t"}

    def test_byte_deterministic(self):
        a = render_svg(self.SERIES, self.STYLE)
        b = render_svg(self.SERIES, self.STYLE)
        assert a == b
        assert a.startswith(b"<?xml")

    def test_single_point_series(self):
        out = render_svg([([1.0], [2.0], "dot")], self.STYLE)
        assert out.startswith(b"<?xml")

    def test_series_validation(self):
        with pytest.raises(ValueError):
            render_svg([], self.STYLE)
        with pytest.raises(ValueError):
            render_svg([([], [], "empty")], self.STYLE)
        with pytest.raises(ValueError):
            render_svg([([1.0, 2.0], [1.0], "ragged")], self.STYLE)
        with pytest.raises(ValueError):
            render_svg([([1.0], [math.nan], "nan")], self.STYLE)

    def test_save_and_atomic_replace(self, tmp_path):
        path = tmp_path / "plot.svg"
        save_svg(path, self.SERIES, self.STYLE)
        first = path.read_bytes()
        write_atomic(path, b"replaced")
        assert path.read_bytes() == b"replaced"
        assert first.startswith(b"<?xml")
        # no stray temp siblings left behind
        assert [p.name for p in tmp_path.iterdir()] == ["plot.svg"]


class TestExperimentConfig:
    def test_range_string_equals_explicit_list(self):
        # exactly-representable points make the two spellings bit-identical
        by_string = ExperimentConfig("erasure-sweep", grid={"lam": "0.0:1.0:3"})
        by_list = ExperimentConfig("erasure-sweep", grid={"lam": [0.0, 0.5, 1.0]})
        assert by_string.grid["lam"] == [0.0, 0.5, 1.0]
        assert config_fingerprint(by_string) == config_fingerprint(by_list)
        uneven = ExperimentConfig("erasure-sweep", grid={"lam": "0.1:0.5:3"})
        assert uneven.grid["lam"] == pytest.approx([0.1, 0.3, 0.5])

    def test_grid_validation_names_the_axis(self):
        with pytest.raises(ValueError, match="'lam'"):
            ExperimentConfig("erasure-sweep", grid={"lam": "0.1:0.5"})
        with pytest.raises(ValueError, match="'lam'"):
            ExperimentConfig("erasure-sweep", grid={"lam": []})
        with pytest.raises(ValueError, match="'lam'"):
            ExperimentConfig("erasure-sweep", grid={"lam": ["a", "b"]})
        with pytest.raises(ValueError):
            ExperimentConfig("erasure-sweep", grid={})

    def test_out_formats_validated(self):
        with pytest.raises(ValueError, match="png"):
            ExperimentConfig("blocksize", grid={"lam": [0.1]}, out_files={"png": "x.png"})

    def test_dict_round_trip_folds_channels_and_out(self):
        cfg = config_from_dict(
            {
                "experiment": "erasure-sweep",
                "channels": ["identity(2)"],
                "grid": {"lam": [0.1]},
                "out": {"csv": "a.csv"},
            }
        )
        assert cfg.inputs["channels"] == ["identity(2)"]
        assert cfg.out_files == {"csv": "a.csv"}

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError, match="sneaky"):
            config_from_dict({"experiment": "blocksize", "grid": {"lam": [0.1]},
                              "sneaky": 1})
        with pytest.raises(ValueError, match="experiment"):
            config_from_dict({"grid": {"lam": [0.1]}})

    def test_fingerprint_covers_identity_only(self):
        base = _config(tmp_path=__import__("pathlib").Path("/tmp/xa"))
        other_out = config_from_dict(dict(FAST_BLOCKSIZE, out_dir="/elsewhere"))
        renamed = config_from_dict(dict(FAST_BLOCKSIZE, name="renamed"))
        reseeded = config_from_dict(dict(FAST_BLOCKSIZE, seed=9))
        assert config_fingerprint(base) == config_fingerprint(other_out)
        assert config_fingerprint(base) == config_fingerprint(renamed)
        assert config_fingerprint(base) != config_fingerprint(reseeded)
        assert ARTIFACT_VERSION in base.identity().values()

    def test_canonical_json_is_key_order_free(self):
        assert canonical_json({"b": 1, "a": [1.5]}) == canonical_json({"a": [1.5], "b": 1})
        with pytest.raises(ValueError):
            canonical_json({"x": math.nan})

    def test_load_config_names_bad_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="broken.json"):
            load_config(path)


class TestRunAndCache:
    def test_blocksize_rows_and_outputs(self, tmp_path):
        cfg = _config(tmp_path)
        record = run(cfg, cache_dir=tmp_path / "cache")
        assert record.cached is False
        assert record.columns == (
            "lam", "coefficient", "lhs", "rhs", "slack", "verdict",
            "restarts_used", "wall_ms",
        )
        assert len(record.rows) == 3
        for row in record.rows:
            want = row["lam"] * (1 - (1 - row["lam"]) ** 1)
            assert row["coefficient"] == pytest.approx(want, abs=1e-12)
            assert row["verdict"] == "PASS"
        out = tmp_path / "out"
        assert {p.name for p in out.iterdir()} == {
            "blocksize.csv", "blocksize.json", "blocksize.svg"
        }

    def test_replay_is_byte_identical(self, tmp_path):
        cfg = _config(tmp_path)
        cache = tmp_path / "cache"
        first = run(cfg, cache_dir=cache)
        blobs = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
        second = run(cfg, cache_dir=cache)
        assert second.cached is True
        assert second.payload() == first.payload()  # timings included
        for p in (tmp_path / "out").iterdir():
            assert p.read_bytes() == blobs[p.name]

    def test_corrupt_cache_entry_is_recomputed(self, tmp_path):
        cfg = _config(tmp_path)
        cache = tmp_path / "cache"
        first = run(cfg, cache_dir=cache)
        entry = next(cache.iterdir())
        mangled = entry.read_text().replace('"lhs": 0.0', '"lhs": 99.0')
        entry.write_text(mangled)
        again = run(cfg, cache_dir=cache)
        assert again.cached is False
        assert again.rows[0]["lhs"] == first.rows[0]["lhs"]

    def test_cache_entry_is_write_once(self, tmp_path):
        cfg = _config(tmp_path)
        cache = tmp_path / "cache"
        run(cfg, cache_dir=cache)
        entry = next(cache.iterdir())
        before = entry.read_bytes()
        run(cfg, cache_dir=cache)
        assert entry.read_bytes() == before
        assert len(list(cache.iterdir())) == 1

    def test_unknown_experiment_names_the_registry(self, tmp_path):
        cfg = ExperimentConfig("warp-drive", grid={"lam": [0.1]})
        with pytest.raises(ValueError, match="registered"):
            run(cfg, cache_dir=tmp_path)

    def test_registry_covers_the_config_surface(self):
        assert set(EXPERIMENTS) == {
            "erasure-sweep", "heralded-additivity", "thm51",
            "blocksize", "games-monogamy",
        }

    def test_erasure_sweep_columns(self, tmp_path):
        cfg = config_from_dict(
            {
                "experiment": "erasure-sweep",
                "channels": ["identity(2)"],
                "grid": {"lam": [0.008]},
                "opts": {"restarts": 1, "ensemble_size": 4, "max_iters": 40},
            }
        )
        record = run(cfg, cache_dir=tmp_path / "cache")
        assert record.columns == (
            "lam", "lhs", "rhs", "slack", "verdict", "restarts_used", "wall_ms"
        )
        assert record.rows[0]["verdict"] == "PASS"

    def test_games_monogamy_row(self, tmp_path):
        cfg = config_from_dict(
            {
                "experiment": "games-monogamy",
                "inputs": {"game": "chsh"},
                "grid": {"n": [1]},
                "opts": {"restarts": 1, "max_sweeps": 30},
            }
        )
        record = run(cfg, cache_dir=tmp_path / "cache")
        row = record.rows[0]
        assert row["classical"] == 0.75
        assert row["verdict"] == "PASS"
        assert row["gap"] <= row["budget"]

    def test_parallel_jobs_match_serial(self, tmp_path):
        cfg = _config(tmp_path)
        serial = run(cfg, cache_dir=tmp_path / "c1")
        parallel = run(cfg, cache_dir=tmp_path / "c2", jobs=3)
        a = [{k: v for k, v in r.items() if k != "wall_ms"} for r in serial.rows]
        b = [{k: v for k, v in r.items() if k != "wall_ms"} for r in parallel.rows]
        assert a == b


class TestCli:
    def _write_config(self, tmp_path, **overrides):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(dict(FAST_BLOCKSIZE, **overrides)))
        return path

    def test_channel_inspection_json(self, capsys):
        code = cli.main(["channel", "erasure(identity(2),0.3)", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["flagged"] is True
        assert payload["quantum_out_dims"] == [2]
        assert [s["label"] for s in payload["flag_sectors"]] == ["success", "failure"]

    def test_holevo_quick(self, capsys):
        code = cli.main(
            ["holevo", "identity(2)", "--restarts", "1", "--ensemble-size", "4",
             "--max-iters", "40", "--json"]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value_bits"] == pytest.approx(1.0, abs=1e-6)

    def test_esq_state_expression(self, capsys):
        code = cli.main(["esq", "bell", "--restarts", "0", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(1.0, abs=1e-6)

    def test_game_values(self, capsys):
        assert cli.main(["game", "value", "--game", "chsh"]) == 0
        out = capsys.readouterr().out
        assert "0.75" in out
        assert cli.main(
            ["game", "value", "--game", "chsh", "--mode", "seesaw",
             "--restarts", "2", "--json"]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["entangled_lower"] >= 0.75

    def test_bounds_exit_codes(self, capsys):
        assert cli.main(
            ["bounds", "--bound", "erasure-capacity", "--lam", "0.008",
             "--restarts", "1", "--ensemble-size", "4", "--max-iters", "40"]
        ) == 0
        assert cli.main(
            ["bounds", "--bound", "erasure-capacity", "--lam", "0.3",
             "--restarts", "1", "--ensemble-size", "4", "--max-iters", "40"]
        ) == 4
        capsys.readouterr()

    def test_guard_exit_code(self, capsys):
        code = cli.main(["holevo", "identity(99)"])
        assert code == 3
        assert "guard" in capsys.readouterr().err

    def test_config_error_exit_code(self, capsys):
        assert cli.main(["run", "/no/such/config.json"]) == 2
        assert "error" in capsys.readouterr().err

    def test_run_and_render_round_trip(self, tmp_path, capsys):
        cfg_path = self._write_config(tmp_path, out_dir=str(tmp_path / "out"))
        code = cli.main(["run", str(cfg_path), "--cache-dir", str(tmp_path / "cache")])
        assert code == 0
        out = capsys.readouterr().out
        assert "blocksize: 3 rows" in out
        emitted = (tmp_path / "out" / "blocksize.svg").read_bytes()
        record = tmp_path / "out" / "blocksize.json"
        target = tmp_path / "re.svg"
        assert cli.main(["render", str(record), "--out", str(target)]) == 0
        assert target.read_bytes() == emitted

    def test_run_honors_out_override(self, tmp_path, capsys):
        cfg_path = self._write_config(tmp_path)
        override = tmp_path / "elsewhere"
        code = cli.main(
            ["run", str(cfg_path), "--out", str(override),
             "--cache-dir", str(tmp_path / "cache")]
        )
        assert code == 0
        capsys.readouterr()
        assert (override / "blocksize.csv").exists()

    def test_env_cache_dir(self, tmp_path, capsys, monkeypatch):
        cfg_path = self._write_config(tmp_path, out_dir=str(tmp_path / "out"))
        env_cache = tmp_path / "env-cache"
        monkeypatch.setenv("HERALDLAB_CACHE_DIR", str(env_cache))
        assert cli.main(["run", str(cfg_path)]) == 0
        capsys.readouterr()
        assert len(list(env_cache.iterdir())) == 1

    def test_unknown_experiment_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"experiment": "warp", "grid": {"lam": [0.1]}}))
        assert cli.main(["run", str(path)]) == 2
        capsys.readouterr()
