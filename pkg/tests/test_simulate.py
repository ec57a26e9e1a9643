import numpy as np
import pytest

from hdwilks.errors import DomainError
from hdwilks.linmodel import DesignDims
from hdwilks.rng import ROLE_Z, stream
from hdwilks.simulate import (
    ConfigError,
    PowerTable,
    SimConfig,
    emit_figure_data,
    format_table,
    gen_noise_cov,
    gen_replication,
    load_config,
    parse_config,
    read_figure_data,
    read_table,
    run_power_study,
    write_table,
)

SMALL = DesignDims(4, 40, 10, 6)


def small_cfg(**kw):
    base = dict(dims=SMALL, c0_grid=(0.0, 0.2, 0.4), reps=12, seed=5)
    base.update(kw)
    return SimConfig(**base)


class TestNoiseCov:
    def test_identity(self):
        np.testing.assert_array_equal(gen_noise_cov(4, 0.0), np.eye(4))

    def test_ar1(self):
        np.testing.assert_allclose(gen_noise_cov(3, 0.9), [[1, 0.9, 0.81], [0.9, 1, 0.9], [0.81, 0.9, 1]])

    def test_cholesky(self):
        C = gen_noise_cov(30, 0.9)
        L = np.linalg.cholesky(C)
        np.testing.assert_allclose(L @ L.T, C, atol=1e-12)

    @pytest.mark.parametrize("rho", [1.0, 1.5, -0.1])
    def test_domain(self, rho):
        with pytest.raises(DomainError):
            gen_noise_cov(3, rho)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(reps=0), dict(rho=1.0), dict(alpha=1.0), dict(c0_grid=(0.1, 0.2)), dict(c0_grid=(0.0, 0.2, 0.1)),
         dict(tests=("lrt", "wald")), dict(tests=("lrt", "lrt")), dict(st_sigma="oracle"), dict(seed=-1),
         dict(z_variance=0.0)],
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            small_cfg(**kw)

    def test_parse(self):
        cfg = parse_config("p = 4\nn = 40  # comment\nq = 10\nq1 = 6\nc0_grid = 0:0.1:0.02\ntests = clrt, st2\n")
        assert cfg.dims == SMALL
        assert cfg.c0_grid == (0.0, 0.02, 0.04, 0.06, 0.08, 0.1)
        assert cfg.tests == ("clrt", "st2")

    def test_all_tests(self):
        assert parse_config("p=4\nn=40\nq=10\nq1=6\ntests=all").tests == ("lrt", "clrt", "bbc", "st1", "st2")

    def test_unknown_keys_listed(self):
        with pytest.raises(ConfigError, match="bar, foo"):
            parse_config("p=4\nn=40\nq=10\nq1=6\nfoo=1\nbar=2")

    @pytest.mark.parametrize("text", ["p=4\nn=40\nq=10", "p=4\nn=40\nq=10\nq1=6\nreps=ten", "p 4", "p=1\np=2"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    @pytest.mark.parametrize("name,rows", [("table1_panel1", 11), ("table1_panel3", 11), ("table2_panel1", 11),
                                           ("table2_panel4", 11)])
    def test_shipped(self, name, rows):
        from pathlib import Path

        cfg = load_config(Path(__file__).parents[1] / "configs" / f"{name}.cfg")
        assert len(cfg.c0_grid) == rows and cfg.reps == 1000 and len(cfg.tests) == 5


class TestReplication:
    def test_null_is_noise(self):
        cfg = small_cfg(rho=0.5)
        data, B = gen_replication(cfg, 0.0, 3)
        assert not B.any()
        data2, _ = gen_replication(cfg, 1.0, 3)
        np.testing.assert_array_equal(data.Z, data2.Z)
        assert not np.array_equal(data.X, data2.X)

    def test_deterministic(self):
        a, _ = gen_replication(small_cfg(), 0.3, 7)
        b, _ = gen_replication(small_cfg(), 0.3, 7)
        np.testing.assert_array_equal(a.X, b.X)
        c, _ = gen_replication(small_cfg(), 0.3, 8)
        assert not np.array_equal(a.X, c.X)

    def test_z_moments(self):
        cfg = small_cfg()
        z = stream(cfg.seed, 0, ROLE_Z).normal(1.0, np.sqrt(cfg.z_variance), size=10**6)
        assert abs(z.mean() - 1.0) < 3 * 0.5 / 1000
        Z = np.vstack([gen_replication(cfg, 0.0, r)[0].Z for r in range(50)])
        assert abs(Z.mean() - 1.0) < 3 * 0.5 / np.sqrt(Z.size)
        assert abs(Z.var() - 0.25) < 0.01


class TestPowerStudy:
    def test_single_rep(self):
        t = run_power_study(small_cfg(reps=1, c0_grid=(0.0,)))
        assert all(v[0] in (0.0, 1.0) for v in t.rates.values())

    def test_threads_identical(self):
        cfg = small_cfg(reps=30)
        texts = {format_table(run_power_study(cfg, threads=k)) for k in (1, 2, 5)}
        assert len(texts) == 1

    def test_progress(self):
        seen = []
        run_power_study(small_cfg(reps=30), progress=lambda d, t: seen.append((d, t)))
        assert seen[-1] == (30, 30) and [d for d, _ in seen] == sorted(d for d, _ in seen)

    def test_error_isolated_to_column(self):
        # p = 8 >= q1 = 6: only the corrected test needs p < q1
        cfg = small_cfg(dims=DesignDims(8, 40, 10, 6))
        t = run_power_study(cfg)
        assert t.rates["clrt"] is None and "p < q1" in t.errors["clrt"]
        assert all(t.rates[m] is not None for m in ("lrt", "bbc", "st1", "st2"))

    def test_power_grows(self):
        t = run_power_study(small_cfg(reps=40, c0_grid=(0.0, 0.5, 2.0), tests=("lrt", "clrt")))
        assert t.rate("clrt", 2.0) >= t.rate("clrt", 0.0)
        assert t.rate("clrt", 2.0) == 1.0

    def test_known_sigma_mode(self):
        t = run_power_study(small_cfg(st_sigma="known", tests=("st1",)))
        assert 0 <= t.rates["st1"][0] <= 1

    def test_size_labels(self):
        text = format_table(run_power_study(small_cfg(reps=3)))
        body = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert body[0] == "c0,label,lrt,clrt,bbc,st1,st2"
        assert body[1].startswith("0.0,size,") and body[2].split(",")[1] == "power"


class TestFiles:
    @pytest.fixture
    def table(self):
        return run_power_study(small_cfg(dims=DesignDims(8, 40, 10, 6), rho=0.3))

    def test_table_round_trip(self, table, tmp_path):
        write_table(table, tmp_path / "t.csv")
        assert read_table(tmp_path / "t.csv") == table

    def test_figure_round_trip(self, table, tmp_path):
        emit_figure_data(table, tmp_path / "f.csv")
        assert read_figure_data(tmp_path / "f.csv") == table

    def test_figure_layout(self, tmp_path):
        t = run_power_study(small_cfg(c0_grid=tuple(0.01 * i for i in range(11)), reps=2))
        emit_figure_data(t, tmp_path / "f.csv")
        body = [ln for ln in (tmp_path / "f.csv").read_text().splitlines() if not ln.startswith("#")]
        assert body[0] == "test,c0,rejection_rate" and len(body) == 1 + 5 * 11

    def test_empty_tests_header_only(self, tmp_path):
        t = run_power_study(small_cfg(tests=()))
        emit_figure_data(t, tmp_path / "f.csv")
        body = [ln for ln in (tmp_path / "f.csv").read_text().splitlines() if not ln.startswith("#")]
        assert body == ["test,c0,rejection_rate"]
        assert read_figure_data(tmp_path / "f.csv") == t

    def test_io_error_has_path(self, table, tmp_path):
        bad = tmp_path / "missing" / "f.csv"
        with pytest.raises(OSError, match="missing"):
            emit_figure_data(table, bad)

    def test_power_table_equality(self, table):
        assert isinstance(table, PowerTable)
        assert table.sizes["lrt"] == table.rates["lrt"][0]
