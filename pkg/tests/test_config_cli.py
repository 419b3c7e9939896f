import csv
import io
import math
from dataclasses import replace

import pytest

from ambc_rates import campaign, cli
from ambc_rates.config import CampaignConfig, ConfigError, config_from_header, load_config, parse_config


def rows_of(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


class TestConfig:
    def test_empty_file_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == CampaignConfig()
        p = cfg.system_params()
        assert (p.p0, p.bandwidth_hz, p.spreading_factor, p.beta) == (3.0, 1e6, 128, 0.8)
        assert p.noise_power == pytest.approx(1e-6, rel=1e-12)
        assert p.kappa == pytest.approx(0.0201)
        g = cfg.geometry()
        assert (g.alpha_ps, g.alpha_sr, g.alpha_pr) == (2.7, 2.7, 3.0)

    def test_beta_out_of_range(self):
        with pytest.raises(ConfigError, match="beta"):
            parse_config("beta = 1.3")

    @pytest.mark.parametrize(
        "text,key",
        [
            ("frobnicate = 1", "frobnicate"),
            ("sweep_points = 1", "sweep_points"),
            ("sweep_from = 5\nsweep_to = 1", "sweep_from"),
            ("spreading_factor = x", "spreading_factor"),
            ("beta = 0.5\nbeta = 0.6", "beta"),
            ("p0_mw = 1\np0_dbm = 0", "p0"),
            ("cs_distribution = qam", "cs_distribution"),
            ("kappa_p = -0.1", "kappa_p"),
        ],
    )
    def test_rejections_name_key(self, text, key):
        with pytest.raises(ConfigError, match=key):
            parse_config(text)

    def test_plan_50_log_points(self):
        cfg = parse_config("sweep_axis = p0\nsweep_from = 0.1\nsweep_to = 100\nsweep_points = 50\nsweep_log = true")
        v = cfg.sweep_values()
        assert len(v) == 50 and v[0] == pytest.approx(0.1) and v[-1] == pytest.approx(100.0)

    def test_dbm_inputs(self):
        cfg = parse_config("p0_dbm = 10\nnoise_power_mw = 2e-6")
        assert cfg.p0_mw == pytest.approx(10.0)
        assert cfg.noise_power == 2e-6
        cfg = parse_config("sweep_dbm = true\nsweep_from = -10\nsweep_to = 20\nsweep_log = false")
        assert cfg.at(20.0).p0_mw == pytest.approx(100.0)

    def test_axis_application(self):
        cfg = CampaignConfig()
        assert replace(cfg, sweep_axis="kappa").at(0.2).system_params().kappa == pytest.approx(0.0816)
        assert replace(cfg, sweep_axis="L", sweep_from=1.0, sweep_to=128.0).at(31.6).spreading_factor == 32
        assert replace(cfg, sweep_axis="distance").at(5.0).d_ps == 5.0

    def test_header_roundtrip(self):
        cfg = parse_config("p0_mw = 0.123456789012345\nkappa_p = 0.05\nseed = 77\ncs_distribution = psk:8")
        text = "\n".join(campaign.header_lines(cfg, "sweep"))
        assert config_from_header(text) == cfg


SMALL = ["--samples", "200", "--seed", "3"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCli:
    def test_rate_one_row(self, capsys):
        code, out, _ = run(capsys, "rate", *SMALL)
        assert code == 0
        rows = rows_of(out)
        assert len(rows) == 1
        r = rows[0]
        assert float(r["c_p_coop_analytic"]) > float(r["c_p_noncoop"])
        assert r["theorem1_holds"] == "true"

    def test_config_error_exit_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("beta = 1.3\n")
        code, _, err = run(capsys, "rate", "--config", str(bad))
        assert code == 2 and "beta" in err
        code, _, _ = run(capsys, "rate", "--config", str(tmp_path / "missing.cfg"))
        assert code == 2

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, _ = run(capsys, "rate", *SMALL, "--out", str(tmp_path / "nodir" / "x.csv"))
        assert code == 2

    def test_sweep_p0_trends(self, capsys, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("fading = fixed-unit\n")
        code, out, _ = run(capsys, "sweep", "--config", str(cfg), *SMALL, "--axis", "p0", "--from", "0.1", "--to", "100", "--points", "6", "--log")
        assert code == 0
        rows = rows_of(out)
        assert [float(r["p0"]) for r in rows] == pytest.approx([0.1 * 10 ** (3 * i / 5) for i in range(6)])
        for r in rows:
            assert float(r["c_p_coop_analytic"]) > float(r["c_p_noncoop"])
            assert float(r["c_p_coop_mc"]) > float(r["c_p_noncoop"])
            assert r["theorem1_holds"] == "true"
        # the primary ceiling does not depend on P0
        assert len({r["ceiling_p"] for r in rows}) == 1

    def test_sweep_kappa_ceiling_varies(self, capsys):
        code, out, _ = run(capsys, "sweep", *SMALL, "--axis", "kappa", "--from", "0.05", "--to", "0.2", "--points", "3", "--linear")
        rows = rows_of(out)
        assert code == 0 and len({r["ceiling_p"] for r in rows}) == 3

    def test_sweep_output_file_and_header(self, capsys, tmp_path):
        out = tmp_path / "sweep.csv"
        code, stdout, _ = run(capsys, "sweep", *SMALL, "--points", "3", "--out", str(out))
        assert code == 0 and stdout == ""
        text = out.read_text(encoding="utf-8")
        assert text.startswith("# ambc-rates sweep\n# format_version: 1\n")
        cfg = config_from_header(text)
        assert cfg.sweep_points == 3 and cfg.seed == 3 and cfg.n_samples == 200

    def test_sweep_byte_identical(self, capsys):
        args = ("sweep", *SMALL, "--points", "4")
        a, b = run(capsys, *args)[1], run(capsys, *args, "--workers", "2")[1]
        assert a == b

    def test_validate_passes(self, capsys):
        code, out, _ = run(capsys, "validate", *SMALL, "--draws", "500")
        assert code == 0
        status = {r["property"]: r["status"] for r in rows_of(out)}
        assert set(status.values()) == {"pass"}
        for name in ("ceilings", "ideal_dominance", "gain_degradation", "theorem1_mc"):
            assert name in status

    def test_validate_kappa_zero_skips(self, capsys, tmp_path):
        cfg = tmp_path / "k0.cfg"
        cfg.write_text("kappa_p = 0\nkappa_r = 0\n")
        code, out, _ = run(capsys, "validate", "--config", str(cfg), *SMALL, "--draws", "50")
        status = {r["property"]: r["status"] for r in rows_of(out)}
        assert code == 0
        assert status["ceilings"] == "skipped"
        assert status["ideal_dominance"] == "skipped"

    def test_validate_no_backscatter_path_is_boundary(self, capsys, tmp_path):
        cfg = tmp_path / "b0.cfg"
        cfg.write_text("beta = 0\n")
        code, out, _ = run(capsys, "validate", "--config", str(cfg), *SMALL, "--draws", "50")
        status = {r["property"]: r["status"] for r in rows_of(out)}
        assert code == 0
        assert status["theorem1[complex-gaussian]"] == "boundary"
        assert status["theorem1_mc"] == "boundary"
        assert status["gain_degradation"] == "boundary"

    def test_validate_violation_exit_1(self, capsys, monkeypatch):
        real = campaign.run_validate

        def broken(cfg):
            res = real(cfg)
            res[0] = campaign.PropertyResult(res[0].name, "fail", res[0].draws, -1.0, "forced")
            return res

        monkeypatch.setattr(campaign, "run_validate", broken)
        code, _, err = run(capsys, "validate", *SMALL, "--draws", "20")
        assert code == 1 and "forced" in err

    def test_waveform_small_run_flags(self, capsys):
        code, out, _ = run(capsys, "waveform", "--symbols", "100", "--seed", "1")
        rows = {r["quantity"]: r for r in rows_of(out)}
        assert rows["sinr_primary"]["flagged"] == "true"
        assert rows["sinr_backscatter"]["flagged"] == "true"
        assert code in (0, 1)

    def test_waveform_defaults_pass(self, capsys):
        code, out, _ = run(capsys, "waveform", "--symbols", "1000000", "--seed", "1")
        assert code == 0
        for r in rows_of(out):
            assert r["pass"] == "true"
            if r["quantity"] != "spreading_slope":
                assert float(r["rel_dev"]) <= 0.03

    def test_waveform_overflow_sentinel(self, capsys, tmp_path):
        cfg = tmp_path / "w.cfg"
        cfg.write_text("kappa_p = 0\nkappa_r = 0\nnoise_power_mw = 1e-20\n")
        code, out, _ = run(capsys, "waveform", "--config", str(cfg), "--symbols", "2000")
        rows = {r["quantity"]: r for r in rows_of(out)}
        assert rows["sinr_primary"]["overflow"] == "true"
        assert code in (0, 1)


def test_fmt_roundtrip():
    for x in (0.1, 1 / 3, 5665371.27432466, 1e-300):
        assert float(campaign.fmt(x)) == x
    assert campaign.fmt(math.inf) == "inf"
