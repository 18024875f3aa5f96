import csv

import pytest

from locspan.cli import (
    CSV_COLUMNS,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    RunConfig,
    _parse_seeds,
    main,
    parse_embedded_config,
    read_config_file,
)
from locspan.geometry import Point
from locspan.graph import build_qudg, save_instance


def _metric(path, name):
    with open(path) as fh:
        for line in fh:
            if line.startswith(f"# metric {name} "):
                return line.split()[3]
    raise AssertionError(f"no metric {name} in {path}")


def _body(path):
    with open(path) as fh:
        return [ln for ln in fh if not ln.startswith("#")]


class TestRunConfig:
    def test_defaults_resolve(self):
        cfg = RunConfig(alpha=0.5).validate()
        assert cfg.beta == pytest.approx(0.3)
        assert cfg.delta == pytest.approx(0.0375)

    def test_explicit_beta_kept(self):
        cfg = RunConfig(beta=0.4).validate()
        assert cfg.beta == 0.4
        assert cfg.delta == pytest.approx(0.05)

    @pytest.mark.parametrize(
        "bad",
        [
            {"n": 0},
            {"alpha": 1.5},
            {"alpha": 0.0},
            {"side": -1.0},
            {"policy": "sometimes"},
            {"band_p": 2.0},
            {"mode": "fast"},
            {"algorithm": "dijkstra"},
            {"eps": -1.0},
        ],
    )
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ConfigError):
            RunConfig(**bad).validate()


class TestConfigFile:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("# comment\n\nn = 25\neps=1.0\nalgorithm=plos\n")
        assert read_config_file(str(p)) == {"n": 25, "eps": 1.0, "algorithm": "plos"}

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("nodes=25\n")
        with pytest.raises(ConfigError, match="unknown key"):
            read_config_file(str(p))

    def test_bad_value(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("n=many\n")
        with pytest.raises(ConfigError, match="bad value"):
            read_config_file(str(p))

    def test_missing_equals(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("n 25\n")
        with pytest.raises(ConfigError, match="key=value"):
            read_config_file(str(p))

    def test_flags_override_file(self, tmp_path):
        conf = tmp_path / "c.txt"
        conf.write_text("n=25\nseed=9\n")
        out = tmp_path / "inst.txt"
        rc = main(["generate", str(out), "--config", str(conf), "--n", "12"])
        assert rc == EXIT_OK
        cfg = parse_embedded_config(str(out))
        assert cfg.n == 12
        assert cfg.seed == 9


class TestGenerate:
    def test_two_close_nodes_one_edge(self, tmp_path, capsys):
        out = tmp_path / "two.txt"
        rc = main(["generate", str(out), "--n", "2", "--side", "0.5"])
        assert rc == EXIT_OK
        assert "nodes 2 edges 1" in capsys.readouterr().out
        assert out.exists()

    def test_fixed_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        argv = ["--n", "30", "--side", "1.5", "--seed", "4"]
        assert main(["generate", str(a)] + argv) == EXIT_OK
        assert main(["generate", str(b)] + argv) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_band_policy_reproducible(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        argv = ["--n", "50", "--side", "1.5", "--alpha", "0.5",
                "--policy", "random", "--band-p", "0.5", "--seed", "8"]
        assert main(["generate", str(a)] + argv) == EXIT_OK
        assert main(["generate", str(b)] + argv) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_unsatisfiable_connectivity(self, tmp_path, capsys):
        out = tmp_path / "far.txt"
        rc = main(["generate", str(out), "--n", "20", "--side", "40"])
        assert rc == EXIT_CONFIG
        assert "connected" in capsys.readouterr().err

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LOCSPAN_OUT", str(tmp_path / "sub"))
        rc = main(["generate", "--n", "10", "--seed", "1", "--side", "1.0"])
        assert rc == EXIT_OK
        assert (tmp_path / "sub" / "qudg-n10-seed1.txt").exists()


@pytest.fixture()
def instance_file(tmp_path):
    path = tmp_path / "inst.txt"
    rc = main(["generate", str(path), "--n", "40", "--side", "1.8",
               "--seed", "3"])
    assert rc == EXIT_OK
    return path


class TestRun:
    def test_los_result_file(self, tmp_path, instance_file):
        res = tmp_path / "r.edges"
        rc = main(["run", str(instance_file), "--algorithm", "los",
                   "--eps", "0.5", "--result", str(res)])
        assert rc == EXIT_OK
        cfg = parse_embedded_config(str(res))
        assert cfg.algorithm == "los"
        assert cfg.n == 40
        for line in _body(str(res)):
            u, v, d, tag = line.split()
            assert int(u) < int(v)
            assert float(d) > 0
            assert tag
        assert float(_metric(res, "stretch")) <= 1.5 * (1 + 1e-9)

    def test_single_cell_stretch(self, tmp_path):
        inst = tmp_path / "tiny.txt"
        assert main(["generate", str(inst), "--n", "12", "--side", "0.4",
                     "--seed", "2"]) == EXIT_OK
        res = tmp_path / "r.edges"
        rc = main(["run", str(inst), "--algorithm", "los", "--eps", "0.25",
                   "--result", str(res)])
        assert rc == EXIT_OK
        assert float(_metric(res, "stretch")) <= 1.25 * (1 + 1e-9)

    def test_plos_planar(self, tmp_path, instance_file):
        res = tmp_path / "p.edges"
        rc = main(["run", str(instance_file), "--algorithm", "plos",
                   "--result", str(res)])
        assert rc == EXIT_OK
        assert _metric(res, "planar") == "True"

    def test_distributed_matches_centralized_file(self, tmp_path, instance_file):
        d, c = tmp_path / "d.edges", tmp_path / "c.edges"
        assert main(["run", str(instance_file), "--algorithm",
                     "distributed-los", "--result", str(d)]) == EXIT_OK
        assert main(["run", str(instance_file), "--algorithm", "los",
                     "--result", str(c)]) == EXIT_OK
        assert _body(str(d)) == _body(str(c))
        assert _metric(d, "rounds") == "12"

    def test_headerless_instance(self, tmp_path):
        pts = [Point(0.1 * i, 0.0) for i in range(6)]
        inst = build_qudg(pts, alpha=1.0)
        path = tmp_path / "bare.txt"
        save_instance(inst, path)
        res = tmp_path / "r.edges"
        rc = main(["run", str(path), "--algorithm", "los",
                   "--result", str(res)])
        assert rc == EXIT_OK
        assert parse_embedded_config(str(res)).n == 6

    def test_conflicting_alpha(self, instance_file, capsys):
        rc = main(["run", str(instance_file), "--alpha", "0.7"])
        assert rc == EXIT_CONFIG
        assert "conflicts" in capsys.readouterr().err

    def test_missing_instance_file(self, tmp_path):
        rc = main(["run", str(tmp_path / "nope.txt")])
        assert rc == EXIT_IO


class TestVerify:
    def test_roundtrip_ok(self, tmp_path, instance_file):
        res = tmp_path / "r.edges"
        assert main(["run", str(instance_file), "--algorithm", "plos",
                     "--result", str(res)]) == EXIT_OK
        assert main(["verify", str(instance_file), str(res)]) == EXIT_OK

    def test_foreign_edge_rejected(self, tmp_path, instance_file, capsys):
        res = tmp_path / "r.edges"
        assert main(["run", str(instance_file), "--algorithm", "los",
                     "--result", str(res)]) == EXIT_OK
        lines = res.read_text().splitlines()
        lines.append("0 39 2.5 fake")
        bad = tmp_path / "bad.edges"
        bad.write_text("\n".join(lines) + "\n")
        rc = main(["verify", str(instance_file), str(bad)])
        assert rc == EXIT_VERIFY
        assert "not present" in capsys.readouterr().err

    def test_length_mismatch_rejected(self, tmp_path, instance_file, capsys):
        res = tmp_path / "r.edges"
        assert main(["run", str(instance_file), "--algorithm", "los",
                     "--result", str(res)]) == EXIT_OK
        lines = res.read_text().splitlines()
        idx = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
        u, v, _, tag = lines[idx].split()
        lines[idx] = f"{u} {v} 0.123456 {tag}"
        bad = tmp_path / "bad.edges"
        bad.write_text("\n".join(lines) + "\n")
        rc = main(["verify", str(instance_file), str(bad)])
        assert rc == EXIT_VERIFY
        assert "length mismatch" in capsys.readouterr().err

    def test_malformed_line(self, tmp_path, instance_file):
        bad = tmp_path / "bad.edges"
        res = tmp_path / "r.edges"
        assert main(["run", str(instance_file), "--algorithm", "los",
                     "--result", str(res)]) == EXIT_OK
        bad.write_text(res.read_text() + "1 2 3\n")
        assert main(["verify", str(instance_file), str(bad)]) == EXIT_CONFIG

    def test_headerless_result_rejected(self, tmp_path, instance_file):
        bad = tmp_path / "bad.edges"
        bad.write_text("0 1 0.5 x\n")
        assert main(["verify", str(instance_file), str(bad)]) == EXIT_CONFIG


class TestSweep:
    def test_three_seeds_three_rows(self, tmp_path):
        rc = main(["sweep", "--out", str(tmp_path), "--n-list", "20",
                   "--seeds", "3", "--side", "1.4", "--prefix", "s"])
        assert rc == EXIT_OK
        with open(tmp_path / "s.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert [r["seed"] for r in rows] == ["0", "1", "2"]
        with open(tmp_path / "s.csv") as fh:
            assert fh.readline().strip() == ",".join(CSV_COLUMNS)

    def test_empty_range(self, tmp_path, capsys):
        rc = main(["sweep", "--out", str(tmp_path), "--n-list", "",
                   "--prefix", "e"])
        assert rc == EXIT_OK
        err = capsys.readouterr().err
        assert "empty sweep" in err
        with open(tmp_path / "e.csv") as fh:
            assert len(fh.readlines()) == 1

    def test_rounds_constant_across_n(self, tmp_path):
        rc = main(["sweep", "--out", str(tmp_path), "--algorithms",
                   "distributed-los", "--n-list", "20,40", "--seeds", "2",
                   "--side", "1.4", "--prefix", "r"])
        assert rc == EXIT_OK
        with open(tmp_path / "r.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert len({r["rounds"] for r in rows}) == 1
        assert all(r["error"] == "" for r in rows)

    def test_partial_failure_recorded(self, tmp_path):
        # plos refuses alpha<1; the row records the error, the sweep goes on
        rc = main(["sweep", "--out", str(tmp_path), "--algorithms",
                   "plos,los", "--n-list", "20", "--seeds", "1",
                   "--alpha", "0.5", "--side", "1.2", "--prefix", "f"])
        assert rc == EXIT_OK
        with open(tmp_path / "f.csv") as fh:
            rows = {r["algorithm"]: r for r in csv.DictReader(fh)}
        assert "unit disk" in rows["plos"]["error"]
        assert rows["los"]["error"] == ""
        assert rows["los"]["stretch"] != ""

    def test_figures_written(self, tmp_path):
        rc = main(["sweep", "--out", str(tmp_path), "--algorithms",
                   "los,distributed-los", "--n-list", "15,25", "--seeds", "1",
                   "--side", "1.2", "--prefix", "g"])
        assert rc == EXIT_OK
        for name in ("g-weight-ratio.svg", "g-stretch.svg", "g-rounds.svg"):
            path = tmp_path / name
            assert path.exists()
            head = path.read_text()[:200].lower()
            assert "svg" in head

    def test_bad_algorithm_list(self, tmp_path):
        rc = main(["sweep", "--out", str(tmp_path), "--algorithms", "magic"])
        assert rc == EXIT_CONFIG


class TestSeedParsing:
    def test_count(self):
        assert _parse_seeds("3") == [0, 1, 2]

    def test_range(self):
        assert _parse_seeds("2:5") == [2, 3, 4]

    def test_list(self):
        assert _parse_seeds("2,5,7") == [2, 5, 7]

    def test_empty(self):
        assert _parse_seeds("") == []


class TestMain:
    def test_no_subcommand(self, capsys):
        assert main([]) == EXIT_CONFIG
        assert "usage" in capsys.readouterr().err.lower()
