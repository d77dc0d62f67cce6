"""Command-line client for sweeps, figures, detection, fits and the oracle.

The CLI owns everything file-shaped: config parsing, CSV tables, resume
logic, figure data files, and exit codes.  Point computations are delegated
to the HTTP compute service — by default an in-process instance of the app
(no sockets involved), or a remote one via --server.

Exit codes: 0 success; 1 configuration error; 2 numerical fault recorded
(sweep completed, faulty rows are NaN); 3 I/O failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__, sweep
from .model import BROKEN, ConfigError
from .sweep import (
    PRESETS,
    SweepIOError,
    SweepRow,
    critical_config,
    detect_critical_points,
    emit_figure,
    load_config,
    preset_job,
    run_sweep,
    top_level_pairs,
    write_critical_table,
    write_oracle_table,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class ServiceFault(Exception):
    """A 4xx/5xx answer from the compute service."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(f"HTTP {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ComputeClient:
    """Thin synchronous client for the compute service.

    Without a server URL the service app runs in-process behind an ASGI
    transport, so the CLI works offline while exercising exactly the same
    request/response path as a deployed service.
    """

    def __init__(self, server: str | None = None):
        self._loop = None
        self._async = None
        self._sync = None
        if server is None:
            from .service import create_app

            self._loop = asyncio.new_event_loop()
            self._async = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()),
                base_url="http://xychain.internal", timeout=None)
        else:
            self._sync = httpx.Client(base_url=server,
                                      timeout=httpx.Timeout(600.0))
        self._measure_cache: dict = {}

    def close(self) -> None:
        if self._sync is not None:
            self._sync.close()
        if self._async is not None:
            self._loop.run_until_complete(self._async.aclose())
            self._loop.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _post(self, path: str, payload: dict) -> dict:
        try:
            if self._sync is not None:
                resp = self._sync.post(path, json=payload)
            else:
                resp = self._loop.run_until_complete(
                    self._async.post(path, json=payload))
        except httpx.TransportError as exc:
            raise SweepIOError(f"compute service unreachable: {exc}") from exc
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ServiceFault(resp.status_code, str(detail))
        return resp.json()

    def measures(self, gamma: float, lam: float, n: int, state: str) -> dict:
        key = (gamma, lam, n, state)
        if key not in self._measure_cache:
            self._measure_cache[key] = self._post(
                "/v1/measures",
                {"gamma": gamma, "lambda": lam, "n": n, "state": state})
        return self._measure_cache[key]

    def evaluate_row(self, gamma: float, lam: float, n: int,
                     state: str) -> SweepRow:
        """Grid-point evaluator with the same fault contract as the local one."""
        try:
            d = self.measures(gamma, lam, n, state)
        except ServiceFault as exc:
            if exc.status_code in (409, 422):
                return SweepRow(gamma=gamma, lam=lam, n=n, state=state,
                                fault=str(exc))
            raise SweepIOError(str(exc)) from exc
        c = d["correlators"]
        return SweepRow(
            gamma=gamma, lam=lam, n=n, state=state,
            px=c["px"], pz=c["pz"], pxx=c["pxx"], pyy=c["pyy"], pzz=c["pzz"],
            pxz_lo=c["pxz"]["lo"], pxz_hi=c["pxz"]["hi"],
            C_lo=d["concurrence"]["lo"], C_hi=d["concurrence"]["hi"],
            N_lo=d["negativity"]["lo"], N_hi=d["negativity"]["hi"],
            G1=d["g1"], G2_lo=d["g2"]["lo"], G2_hi=d["g2"]["hi"],
            branch=d["branch"], energy=d["energy"])

    def spectra(self, gamma: float, lam: float, n: int, state: str) -> tuple:
        d = self.measures(gamma, lam, n, state)
        key = "r_spectrum_hi" if state == BROKEN else "r_spectrum_lo"
        return tuple(d[key])

    def oracle(self, gamma: float, lam: float, n: int, sites: int,
               boundary: str) -> dict:
        return self._post("/v1/oracle",
                          {"gamma": gamma, "lambda": lam, "n": n,
                           "sites": sites, "boundary": boundary})

    def fitlen(self, gamma: float, lam: float, state: str,
               n_max: int) -> dict:
        return self._post("/v1/fitlen",
                          {"gamma": gamma, "lambda": lam, "state": state,
                           "n_max": n_max})


def _read_config_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def cmd_sweep(args, client: ComputeClient) -> int:
    jobs = load_config(args.config)
    fault_total = 0
    for job in jobs:
        outcome = run_sweep(job, evaluate=client.evaluate_row)
        fault_total += len(outcome.faults)
        print(f"{job.name}: {outcome.csv_path} "
              f"({outcome.evaluated} new, {outcome.skipped} resumed, "
              f"{len(outcome.faults)} faults)")
        for key, msg in sorted(outcome.faults.items()):
            print(f"  fault at {key}: {msg}", file=sys.stderr)
    return EXIT_NUMERICAL if fault_total else EXIT_OK


def cmd_figure(args, client: ComputeClient) -> int:
    overrides = top_level_pairs(_read_config_text(args.config))
    job = preset_job(args.preset, overrides)
    outcome = run_sweep(job, evaluate=client.evaluate_row)
    paths = emit_figure(args.preset, outcome.rows, job.out_dir,
                        spectra=client.spectra)
    print(f"{args.preset}: {outcome.csv_path} "
          f"({outcome.evaluated} new, {outcome.skipped} resumed, "
          f"{len(outcome.faults)} faults)")
    for path in paths:
        print(f"  {path}")
    return EXIT_NUMERICAL if outcome.faults else EXIT_OK


def cmd_critical(args, client: ComputeClient) -> int:
    jobs = [job for job in load_config(args.config) if job.gammas]
    if not jobs:
        raise ConfigError("critical detection needs a grid (set gamma)")
    fault_total = 0
    for job in jobs:
        grid_job = critical_config(job)
        outcome = run_sweep(grid_job, evaluate=client.evaluate_row)
        fault_total += len(outcome.faults)
        estimates = [detect_critical_points(outcome.rows, g)
                     for g in grid_job.gammas]
        table_path = Path(grid_job.out_dir) / f"{job.name}_critical.csv"
        write_critical_table(table_path, grid_job, estimates)
        print(f"{job.name}: {table_path}")
        for est in estimates:
            l1 = "none" if est.lambda1 is None else f"{est.lambda1:.4f}"
            l2 = "none" if est.lambda2 is None else f"{est.lambda2:.4f}"
            flags = f" flags={','.join(est.flags)}" if est.flags else ""
            print(f"  gamma={est.gamma:g}: lambda1={l1} lambda2={l2}{flags}")
    return EXIT_NUMERICAL if fault_total else EXIT_OK


def cmd_oracle(args, client: ComputeClient) -> int:
    jobs = [job for job in load_config(args.config) if job.gammas]
    if not jobs:
        raise ConfigError("oracle comparison needs a grid (set gamma)")
    fault_total = 0
    for job in jobs:
        rows = []
        for gamma in job.gammas:
            for lam in job.lambdas:
                for n in job.ns:
                    try:
                        payload = client.oracle(gamma, lam, n,
                                                job.ed_sites, job.boundary)
                    except ServiceFault as exc:
                        fault_total += 1
                        print(f"  fault at gamma={gamma} lambda={lam} n={n}: "
                              f"{exc}", file=sys.stderr)
                        continue
                    for entry in payload["rows"]:
                        rows.append(sweep.OracleRow(
                            gamma=gamma, lam=lam, n=n, sites=job.ed_sites,
                            quantity=entry["quantity"],
                            thermodynamic=entry["thermodynamic"],
                            ed=entry["ed"], diff=entry["diff"]))
        out_dir = Path(job.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table_path = out_dir / f"{job.name}_oracle.csv"
        write_oracle_table(table_path, job, rows)
        worst = max((r.diff for r in rows
                     if r.quantity not in ("pxy", "pyz")), default=0.0)
        print(f"{job.name}: {table_path} ({len(rows)} comparisons, "
              f"worst diagonal diff {worst:.3e})")
    return EXIT_NUMERICAL if fault_total else EXIT_OK


def cmd_fitlen(args, client: ComputeClient) -> int:
    jobs = load_config(args.config)
    job = jobs[0]
    try:
        payload = client.fitlen(job.fit_gamma, job.fit_lambda,
                                job.fit_state, job.fit_n_max)
    except ServiceFault as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{job.name}_fitlen.json"
    out_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    xi_e = payload["xi_e"]
    xi_c = payload["xi_c"]
    ratio = payload["ratio"]

    def show(x):
        return "inf" if x is None else f"{x:.4f}"

    status = "rejected" if payload["rejected"] else "ok"
    print(f"fit at gamma={job.fit_gamma:g} lambda={job.fit_lambda:g} "
          f"({job.fit_state}, n<={job.fit_n_max}): {status}")
    print(f"  xi_e={show(xi_e)} xi_c={show(xi_c)} ratio={show(ratio)}")
    print(f"  wrote {out_path}")
    return EXIT_OK


def cmd_serve(args, _client=None) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xychain",
        description="Phase-diagram sweeps of XY-chain correlators and "
                    "entanglement measures.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--server", default=None, metavar="URL",
        help="base URL of a running compute service "
             "(default: run the service in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run or resume the sweeps in a config")
    p.add_argument("config")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("figure",
                       help="run a figure preset and emit its plot data")
    p.add_argument("preset", help=f"one of fig1..fig{len(PRESETS)}")
    p.add_argument("config")
    p.set_defaults(handler=cmd_figure)

    p = sub.add_parser("critical",
                       help="estimate both transition couplings from a sweep")
    p.add_argument("config")
    p.set_defaults(handler=cmd_critical)

    p = sub.add_parser("oracle",
                       help="compare against the finite-chain oracle")
    p.add_argument("config")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("fitlen",
                       help="fit the decay lengths of the two-site measure "
                            "and correlator")
    p.add_argument("config")
    p.set_defaults(handler=cmd_fitlen)

    p = sub.add_parser("serve", help="run the compute service over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 0 for --help/--version
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    if args.command == "serve":
        return cmd_serve(args)
    try:
        with ComputeClient(args.server) as client:
            return args.handler(args, client)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
