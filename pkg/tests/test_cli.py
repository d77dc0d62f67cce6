"""End-to-end command-line tests.

These drive ``main(argv)`` directly (no subprocesses) with the compute
service running in-process, so they cover the full path a user hits:
config file -> HTTP round-trip -> CSV/JSON artifacts -> exit code.
"""

import json
import math

import pytest

from xychain.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    ComputeClient,
    ServiceFault,
    main,
)
from xychain.measures import entanglement_report
from xychain.model import BROKEN, SYMMETRIC, ModelParams
from xychain.sweep import SweepConfig, evaluate_row, read_table, run_sweep

SMALL_CONFIG = """
name = small
gamma = 0.8
lambda_start = 0.4
lambda_stop = 0.6
lambda_step = 0.1
n = 1
state = both
out_dir = {out_dir}
"""


def write_config(tmp_path, text, **fmt):
    path = tmp_path / "job.cfg"
    path.write_text(text.format(**fmt))
    return str(path)


class TestParser:
    def test_version_exits_ok(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "xychain" in capsys.readouterr().out

    def test_help_exits_ok(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "sweep" in capsys.readouterr().out

    def test_no_command_is_config_error(self, capsys):
        assert main([]) == EXIT_CONFIG

    def test_unknown_command_is_config_error(self, capsys):
        assert main(["plot"]) == EXIT_CONFIG

    def test_missing_config_argument(self, capsys):
        assert main(["sweep"]) == EXIT_CONFIG


class TestComputeClient:
    @pytest.mark.parametrize("gamma, lam, state",
                             [(1.0, 0.5, SYMMETRIC), (0.8, 1.3, BROKEN)])
    def test_row_matches_library_route(self, gamma, lam, state):
        with ComputeClient() as client:
            remote = client.evaluate_row(gamma, lam, 1, state)
        local = evaluate_row(gamma, lam, 1, state)
        assert remote == local  # bit-identical after the JSON round-trip

    def test_domain_error_becomes_fault_row(self):
        with ComputeClient() as client:
            row = client.evaluate_row(0.0, 1.0, 1, SYMMETRIC)
        assert row.fault and "422" in row.fault
        assert row.gamma == 0.0 and row.lam == 1.0
        assert math.isnan(row.px)

    def test_measures_cached_per_point(self):
        with ComputeClient() as client:
            first = client.measures(0.8, 0.5, 1, SYMMETRIC)
            second = client.measures(0.8, 0.5, 1, SYMMETRIC)
        assert first is second

    def test_spectra_column_depends_on_state(self):
        with ComputeClient() as client:
            sym = client.spectra(0.8, 1.3, 1, SYMMETRIC)
            broken = client.spectra(0.8, 1.3, 1, BROKEN)
        rep_s = entanglement_report(ModelParams(0.8, 1.3), 1, SYMMETRIC)
        rep_b = entanglement_report(ModelParams(0.8, 1.3), 1, BROKEN)
        assert sym == tuple(rep_s.r_spectrum_lo)
        assert broken == tuple(rep_b.r_spectrum_hi)

    def test_service_fault_carries_status(self):
        with ComputeClient() as client:
            with pytest.raises(ServiceFault) as err:
                client.oracle(0.8, 0.5, 1, sites=3, boundary="periodic")
        assert err.value.status_code == 422


class TestSweepCommand:
    def test_fresh_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "out")
        assert main(["sweep", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "small" in out and "6 new" in out and "0 faults" in out
        csv_path = tmp_path / "out" / "small.csv"
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 2 + 3 * 2  # header pair + 3 lambdas x 2 states

    def test_resume_is_noop_with_identical_bytes(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "out")
        assert main(["sweep", cfg]) == EXIT_OK
        csv_path = tmp_path / "out" / "small.csv"
        before = csv_path.read_bytes()
        assert main(["sweep", cfg]) == EXIT_OK
        assert "6 resumed" in capsys.readouterr().out
        assert csv_path.read_bytes() == before

    def test_service_route_matches_library_bytes(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "cli")
        assert main(["sweep", cfg]) == EXIT_OK
        job = SweepConfig(name="small", gammas=(0.8,), lam_start=0.4,
                          lam_stop=0.6, lam_step=0.1, ns=(1,),
                          state_kinds=(SYMMETRIC, BROKEN),
                          out_dir=str(tmp_path / "lib"))
        run_sweep(job)
        cli_bytes = (tmp_path / "cli" / "small.csv").read_bytes()
        lib_bytes = (tmp_path / "lib" / "small.csv").read_bytes()
        assert cli_bytes == lib_bytes

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["sweep", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("gamma = 0.8\nwavelength = 2\n")
        assert main(["sweep", str(cfg)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_changed_grid_refuses_resume(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "out")
        assert main(["sweep", cfg]) == EXIT_OK
        cfg2 = tmp_path / "job2.cfg"
        cfg2.write_text(SMALL_CONFIG.format(out_dir=tmp_path / "out")
                        .replace("lambda_stop = 0.6", "lambda_stop = 0.7"))
        assert main(["sweep", str(cfg2)]) == EXIT_CONFIG
        assert "different configuration" in capsys.readouterr().err

    def test_unwritable_out_dir(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        cfg = write_config(tmp_path, SMALL_CONFIG,
                           out_dir=blocker / "nested")
        assert main(["sweep", cfg]) == EXIT_IO
        assert "I/O error" in capsys.readouterr().err

    def test_fault_rows_exit_numerical(self, tmp_path, capsys, monkeypatch):
        real = ComputeClient.evaluate_row

        def flaky(self, gamma, lam, n, state):
            if lam == 0.5:
                from xychain.sweep import SweepRow
                return SweepRow(gamma=gamma, lam=lam, n=n, state=state,
                                fault="HTTP 422: injected")
            return real(self, gamma, lam, n, state)

        monkeypatch.setattr(ComputeClient, "evaluate_row", flaky)
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "out")
        assert main(["sweep", cfg]) == EXIT_NUMERICAL
        captured = capsys.readouterr()
        assert "2 faults" in captured.out
        assert "fault at" in captured.err
        # faulted rows are recorded as NaN, not dropped
        _, rows = read_table(tmp_path / "out" / "small.csv")
        faulted = [r for r in rows if r.lam == 0.5]
        assert len(faulted) == 2
        assert all(math.isnan(r.px) for r in faulted)

    def test_unreachable_server_is_io_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL_CONFIG, out_dir=tmp_path / "out")
        rc = main(["--server", "http://127.0.0.1:9", "sweep", cfg])
        assert rc == EXIT_IO
        assert "I/O error" in capsys.readouterr().err


FIGURE_CONFIG = """
lambda_start = 0.5
lambda_stop = 2.5
lambda_step = 0.5
out_dir = {out_dir}
"""


class TestFigureCommand:
    def test_fig13_emits_plot_files(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FIGURE_CONFIG, out_dir=tmp_path)
        assert main(["figure", "fig13", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "fig13" in out and "0 faults" in out
        for name in ("fig13_g0.2_C_lo.dat", "fig13_g0.2_C_hi.dat",
                     "fig13_g0.2_C_sym.dat", "fig13.gp"):
            assert (tmp_path / name).exists(), name
        dat = (tmp_path / "fig13_g0.2_C_lo.dat").read_text().splitlines()
        assert dat[0].startswith("#")
        assert len(dat) == 1 + 5  # comment + one line per lambda

    def test_fig9_emits_spectrum_branches(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FIGURE_CONFIG, out_dir=tmp_path)
        assert main(["figure", "fig9", cfg]) == EXIT_OK
        for i in range(1, 5):
            assert (tmp_path / f"fig9_g0.8_eps{i}.dat").exists()

    def test_unknown_preset(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FIGURE_CONFIG, out_dir=tmp_path)
        assert main(["figure", "fig99", cfg]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_grid_override_refused(self, tmp_path, capsys):
        cfg = tmp_path / "f.cfg"
        cfg.write_text(f"gamma = 0.5\nout_dir = {tmp_path}\n")
        assert main(["figure", "fig13", str(cfg)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err


CRITICAL_CONFIG = """
name = crit
gamma = 1.0
lambda_start = 0.9
lambda_stop = 1.1
lambda_step = 0.05
out_dir = {out_dir}
"""


class TestCriticalCommand:
    def test_detection_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path, CRITICAL_CONFIG, out_dir=tmp_path)
        assert main(["critical", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "gamma=1" in out and "lambda1=" in out
        table = (tmp_path / "crit_critical.csv").read_text().splitlines()
        assert len(table) == 3  # header pair + one gamma row

    def test_needs_a_grid(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("fit_gamma = 1.0\n")
        assert main(["critical", str(cfg)]) == EXIT_CONFIG
        assert "needs a grid" in capsys.readouterr().err


ORACLE_CONFIG = """
name = check
gamma = 0.8
lambda_start = 0.5
lambda_stop = 0.5
lambda_step = 0.1
n = 1
ed_sites = 6
out_dir = {out_dir}
"""


class TestOracleCommand:
    def test_comparison_table(self, tmp_path, capsys):
        cfg = write_config(tmp_path, ORACLE_CONFIG, out_dir=tmp_path)
        assert main(["oracle", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "7 comparisons" in out and "worst diagonal diff" in out
        table = (tmp_path / "check_oracle.csv").read_text().splitlines()
        assert len(table) == 2 + 7
        assert table[1].split(",")[:2] == ["gamma", "lambda"]

    def test_needs_a_grid(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("ed_sites = 6\n")
        assert main(["oracle", str(cfg)]) == EXIT_CONFIG


FITLEN_CONFIG = """
fit_gamma = 1.0
fit_lambda = {lam}
fit_n_max = 12
out_dir = {out_dir}
"""


class TestFitlenCommand:
    def test_fit_away_from_transition(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FITLEN_CONFIG, lam=0.8,
                           out_dir=tmp_path)
        assert main(["fitlen", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ok" in out and "xi_e=" in out and "ratio=" in out
        payload = json.loads((tmp_path / "sweep_fitlen.json").read_text())
        assert payload["rejected"] is False
        assert payload["ratio"] == pytest.approx(2.0, rel=0.2)

    def test_fit_at_transition_reports_rejection(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FITLEN_CONFIG, lam=1.0,
                           out_dir=tmp_path)
        assert main(["fitlen", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "rejected" in out
        payload = json.loads((tmp_path / "sweep_fitlen.json").read_text())
        assert payload["ratio"] is None
