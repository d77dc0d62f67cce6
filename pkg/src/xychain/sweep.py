"""Configuration-driven phase-diagram sweeps and their post-processing.

This module owns everything that turns point evaluations into reviewable
artifacts: text-file configuration parsing, the CSV table schema (versioned,
deterministic, resumable), figure presets and plot-data emission,
critical-point detection from a finished table, entanglement/correlation
decay-length fits, and the finite-chain comparison runner.

Point evaluation itself is injectable so the command-line layer can route it
through the HTTP service while tests and library callers use the in-process
functions directly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .correlators import correlator_set, spontaneous_magnetization
from .measures import entanglement_report
from .model import (
    BROKEN,
    ConfigError,
    InconsistentCorrelatorsError,
    ModelParams,
    NonPositiveStateError,
    ParameterDomainError,
    STATE_KINDS,
    SYMMETRIC,
    check_state_kind,
)
from .numerics import DecayFit, QuadratureError, fit_exponential_decay

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

#: Fixed, ordered CSV schema for sweep tables.
CSV_COLUMNS = (
    "gamma", "lambda", "n", "state",
    "px", "pz", "pxx", "pyy", "pzz",
    "pxz_lo", "pxz_hi",
    "C_lo", "C_hi", "N_lo", "N_hi",
    "G1", "G2_lo", "G2_hi",
    "branch", "energy",
)

#: Exceptions recorded as per-row faults instead of aborting a sweep.
ROW_FAULTS = (
    ParameterDomainError,
    InconsistentCorrelatorsError,
    NonPositiveStateError,
    QuadratureError,
    ArithmeticError,
)

MEASURE_CHOICES = ("all", "concurrence", "negativity", "g1", "g2")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SweepConfig:
    """One sweep job: a (gamma, lambda, n, state) grid plus output options.

    The lambda grid is ``lam_start, lam_start + lam_step, ..., <= lam_stop``;
    an inverted range (``lam_stop < lam_start``) is an empty grid.  Fit and
    finite-chain options ride along so a single config file can drive every
    subcommand.
    """

    name: str = "sweep"
    gammas: tuple = ()
    lam_start: float = 0.0
    lam_stop: float = 3.0
    lam_step: float = 0.01
    ns: tuple = (1,)
    state_kinds: tuple = (SYMMETRIC,)
    measures: tuple = ("all",)
    out_dir: str = "."
    preset: str | None = None
    ed_sites: int = 12
    boundary: str = "periodic"
    fit_gamma: float = 1.0
    fit_lambda: float = 1.2
    fit_state: str = SYMMETRIC
    fit_n_max: int = 20

    def __post_init__(self):
        if self.lam_step <= 0:
            raise ConfigError("lambda_step must be positive")
        if self.lam_start < 0:
            raise ConfigError("lambda_start must be >= 0")
        for g in self.gammas:
            if not 0.0 < g <= 1.0:
                raise ConfigError(f"gamma {g} outside (0, 1]")
        for n in self.ns:
            if n < 1:
                raise ConfigError(f"separation n={n} must be >= 1")
        try:
            for kind in self.state_kinds:
                check_state_kind(kind)
            check_state_kind(self.fit_state)
        except ParameterDomainError as exc:
            # inside a config these are configuration mistakes, not
            # numerical faults
            raise ConfigError(str(exc)) from exc
        for m in self.measures:
            if m not in MEASURE_CHOICES:
                raise ConfigError(f"unknown measure {m!r}")
        if self.boundary not in ("periodic", "open"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        if not 4 <= self.ed_sites <= 14:
            raise ConfigError("ed_sites must be in [4, 14]")
        if self.fit_n_max < 6:
            raise ConfigError("fit_n_max must be >= 6")

    @property
    def lambdas(self) -> tuple:
        return lambda_grid(self.lam_start, self.lam_stop, self.lam_step)

    def grid(self):
        """Yield (gamma, lam, n, state) points in canonical order."""
        for gamma in self.gammas:
            for lam in self.lambdas:
                for n in self.ns:
                    for kind in self.state_kinds:
                        yield gamma, lam, n, kind

    def digest(self) -> str:
        """12-hex-digit hash of the grid-defining fields."""
        payload = "|".join([
            repr(tuple(self.gammas)),
            repr(self.lam_start), repr(self.lam_stop), repr(self.lam_step),
            repr(tuple(self.ns)),
            repr(tuple(self.state_kinds)),
        ])
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def lambda_grid(start: float, stop: float, step: float) -> tuple:
    """Inclusive arithmetic grid, rounded to 12 decimals for stable keys."""
    if step <= 0:
        raise ConfigError("lambda_step must be positive")
    if stop < start:
        return ()
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


_LIST_KEYS = {"gamma", "n", "state", "measures"}
_SCALAR_KEYS = {
    "name", "lambda_start", "lambda_stop", "lambda_step", "out_dir",
    "preset", "ed_sites", "boundary",
    "fit_gamma", "fit_lambda", "fit_state", "fit_n_max",
}
_ALL_KEYS = _LIST_KEYS | _SCALAR_KEYS


def _parse_floats(raw: str) -> tuple:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {raw!r}") from exc


def _parse_ints(raw: str) -> tuple:
    vals = _parse_floats(raw)
    out = []
    for v in vals:
        if v != int(v):
            raise ConfigError(f"expected integers, got {raw!r}")
        out.append(int(v))
    return tuple(out)


def _parse_states(raw: str) -> tuple:
    toks = tuple(tok.strip() for tok in raw.replace(",", " ").split())
    kinds = []
    for tok in toks:
        if tok == "both":
            kinds.extend([SYMMETRIC, BROKEN])
        elif tok in STATE_KINDS:
            kinds.append(tok)
        else:
            raise ConfigError(f"unknown state kind {tok!r}")
    # preserve order, drop duplicates
    return tuple(dict.fromkeys(kinds))


def _apply_keys(base: SweepConfig, pairs: Mapping[str, str]) -> SweepConfig:
    kwargs = {}
    for key, raw in pairs.items():
        if key == "gamma":
            kwargs["gammas"] = _parse_floats(raw)
        elif key == "n":
            kwargs["ns"] = _parse_ints(raw)
        elif key == "state":
            kwargs["state_kinds"] = _parse_states(raw)
        elif key == "measures":
            kwargs["measures"] = tuple(raw.replace(",", " ").split())
        elif key in ("lambda_start", "lambda_stop", "lambda_step",
                     "fit_gamma", "fit_lambda"):
            kwargs[{"lambda_start": "lam_start",
                    "lambda_stop": "lam_stop",
                    "lambda_step": "lam_step"}.get(key, key)] = float(raw)
        elif key in ("ed_sites", "fit_n_max"):
            kwargs[key] = int(raw)
        elif key in ("name", "out_dir", "boundary", "fit_state", "preset"):
            kwargs[key] = raw
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return replace(base, **kwargs)
    except TypeError as exc:  # pragma: no cover - guarded by key table
        raise ConfigError(str(exc)) from exc


def _read_pairs(lines: Iterable) -> dict:
    pairs = {}
    for lineno, line in lines:
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        pairs[key] = raw
    return pairs


def _split_blocks(text: str):
    top_lines, blocks = [], []
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if line != "[preset]":
                raise ConfigError(f"line {lineno}: unknown section {line!r}")
            current = []
            blocks.append(current)
            continue
        the_list = top_lines if current is None else current
        the_list.append((lineno, line))
    return top_lines, blocks


def top_level_pairs(text: str) -> dict:
    """Validated key/value pairs of the top (sectionless) config block."""
    top_lines, _blocks = _split_blocks(text)
    return _read_pairs(top_lines)


def parse_config(text: str) -> list:
    """Parse a key = value config with optional repeated [preset] blocks.

    Returns the list of sweep jobs the file defines: one for the top-level
    block (only if it specifies a grid via ``gamma``) followed by one per
    [preset] section.  A preset section whose ``preset`` key names a builtin
    figure starts from that figure's parameter set and may override it.
    """
    top_lines, blocks = _split_blocks(text)
    top_pairs = _read_pairs(top_lines)
    base = _apply_keys(SweepConfig(), top_pairs)

    jobs = []
    if base.gammas:
        jobs.append(base)
    for block in blocks:
        pairs = _read_pairs(block)
        preset_id = pairs.get("preset")
        if preset_id is not None:
            if preset_id not in PRESETS:
                raise ConfigError(f"unknown preset {preset_id!r}")
            start = replace(
                PRESETS[preset_id].config,
                out_dir=base.out_dir,
                ed_sites=base.ed_sites,
                boundary=base.boundary,
            )
            pairs = {k: v for k, v in pairs.items() if k != "preset"}
            job = _apply_keys(start, pairs)
        else:
            job = _apply_keys(base, pairs)
            if not job.gammas:
                raise ConfigError("preset block defines no grid (missing gamma)")
        jobs.append(job)
    if not jobs:
        # a config with no grid at all is still valid: it describes an empty
        # sweep (exit success, empty table)
        jobs.append(base)
    return jobs


def load_config(path) -> list:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# rows and tables


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a sweep table (all CSV columns plus fault info)."""

    gamma: float
    lam: float
    n: int
    state: str
    px: float = math.nan
    pz: float = math.nan
    pxx: float = math.nan
    pyy: float = math.nan
    pzz: float = math.nan
    pxz_lo: float = math.nan
    pxz_hi: float = math.nan
    C_lo: float = math.nan
    C_hi: float = math.nan
    N_lo: float = math.nan
    N_hi: float = math.nan
    G1: float = math.nan
    G2_lo: float = math.nan
    G2_hi: float = math.nan
    branch: str = ""
    energy: float = math.nan
    fault: str | None = None

    @property
    def key(self):
        return (self.gamma, self.lam, self.n, self.state)


_STATE_ORDER = {SYMMETRIC: 0, BROKEN: 1}


def _sort_key(row: SweepRow):
    return (row.gamma, row.lam, row.n, _STATE_ORDER.get(row.state, 2))


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def row_to_csv(row: SweepRow) -> str:
    vals = [
        row.gamma, row.lam, row.n, row.state,
        row.px, row.pz, row.pxx, row.pyy, row.pzz,
        row.pxz_lo, row.pxz_hi,
        row.C_lo, row.C_hi, row.N_lo, row.N_hi,
        row.G1, row.G2_lo, row.G2_hi,
        row.branch, row.energy,
    ]
    return ",".join(_fmt(v) for v in vals)


def row_from_csv(line: str) -> SweepRow:
    parts = line.split(",")
    if len(parts) != len(CSV_COLUMNS):
        raise ConfigError(f"malformed table row: {line!r}")

    def f(tok):
        return float(tok)

    return SweepRow(
        gamma=f(parts[0]), lam=f(parts[1]), n=int(parts[2]), state=parts[3],
        px=f(parts[4]), pz=f(parts[5]), pxx=f(parts[6]), pyy=f(parts[7]),
        pzz=f(parts[8]), pxz_lo=f(parts[9]), pxz_hi=f(parts[10]),
        C_lo=f(parts[11]), C_hi=f(parts[12]), N_lo=f(parts[13]),
        N_hi=f(parts[14]), G1=f(parts[15]), G2_lo=f(parts[16]),
        G2_hi=f(parts[17]), branch=parts[18], energy=f(parts[19]),
    )


def evaluate_row(gamma: float, lam: float, n: int, state: str) -> SweepRow:
    """Compute one grid point with the in-process library.

    Numerical faults listed in ROW_FAULTS become NaN rows with the fault
    message attached; anything else propagates.
    """
    try:
        params = ModelParams(gamma, lam)
        report = entanglement_report(params, n=n, state_kind=state)
    except ROW_FAULTS as exc:
        return SweepRow(gamma=gamma, lam=lam, n=n, state=state,
                        fault=f"{type(exc).__name__}: {exc}")
    # key on the requested kind: a broken-state request below the transition
    # legitimately evaluates to the symmetric set, but the grid key must not
    # change or resume would recompute the row forever
    return replace(row_from_report(report), state=state)


def row_from_report(report) -> SweepRow:
    cs = report.correlators
    return SweepRow(
        gamma=report.params.gamma, lam=report.params.lam,
        n=report.n, state=report.state_kind,
        px=cs.px, pz=cs.pz, pxx=cs.pxx, pyy=cs.pyy, pzz=cs.pzz,
        pxz_lo=cs.pxz.lo, pxz_hi=cs.pxz.hi,
        C_lo=report.concurrence.lo, C_hi=report.concurrence.hi,
        N_lo=report.negativity.lo, N_hi=report.negativity.hi,
        G1=report.g1, G2_lo=report.g2.lo, G2_hi=report.g2.hi,
        branch=report.branch, energy=report.energy,
    )


def header_line(config: SweepConfig) -> str:
    return f"# schema={SCHEMA_VERSION} config={config.digest()}"


def write_table(path, config: SweepConfig, rows: Sequence) -> None:
    """Atomically write the sorted, deterministic CSV table."""
    path = Path(path)
    body = [header_line(config), ",".join(CSV_COLUMNS)]
    body.extend(row_to_csv(r) for r in sorted(rows, key=_sort_key))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(body) + "\n")
    os.replace(tmp, path)


def read_table(path) -> tuple:
    """Read a table written by write_table; returns (config_digest, rows)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# schema="):
        raise ConfigError(f"{path}: missing schema header")
    head = lines[0].split()
    schema = head[1].partition("=")[2]
    if schema != str(SCHEMA_VERSION):
        raise ConfigError(f"{path}: unsupported schema version {schema}")
    digest = head[2].partition("=")[2]
    rows = []
    for line in lines[1:]:
        if not line or line.startswith("#") or line.startswith("gamma,"):
            continue
        rows.append(row_from_csv(line))
    return digest, rows


@dataclass
class SweepOutcome:
    config: SweepConfig
    csv_path: Path
    rows: list
    evaluated: int
    skipped: int
    faults: dict


def run_sweep(config: SweepConfig, evaluate: Callable | None = None,
              progress: Callable | None = None) -> SweepOutcome:
    """Run (or resume) one sweep job and write its CSV table.

    evaluate(gamma, lam, n, state) -> SweepRow may be injected (the CLI routes
    it through the compute service); the default is the in-process evaluator.
    Completed rows are identified by their (gamma, lambda, n, state) key and
    skipped.  The final table is rewritten sorted, so an interrupted-and-
    resumed sweep is byte-identical to an uninterrupted one.
    """
    evaluate = evaluate or evaluate_row
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{config.name}.csv"
        existing = []
        if csv_path.exists():
            digest, existing = read_table(csv_path)
            if digest != config.digest():
                raise ConfigError(
                    f"{csv_path} holds a table for a different configuration "
                    f"(config hash {digest}, expected {config.digest()}); "
                    "move it aside or change the job name")
        done = {row.key for row in existing}
        rows = list(existing)
        faults = {}
        times = {}
        evaluated = skipped = 0
        append = csv_path.open("a")
        try:
            if not existing:
                append.write(header_line(config) + "\n")
                append.write(",".join(CSV_COLUMNS) + "\n")
                append.flush()
            for gamma, lam, n, kind in config.grid():
                key = (gamma, lam, n, kind)
                if key in done:
                    skipped += 1
                    continue
                row = evaluate(gamma, lam, n, kind)
                evaluated += 1
                done.add(key)
                rows.append(row)
                if row.fault:
                    faults["|".join(map(str, key))] = row.fault
                times["|".join(map(str, key))] = _now_iso()
                append.write(row_to_csv(row) + "\n")
                append.flush()
                if progress is not None:
                    progress(row)
        finally:
            append.close()
        write_table(csv_path, config, rows)
        _write_meta(csv_path, config, times, faults)
    except OSError as exc:
        raise SweepIOError(f"sweep I/O failure: {exc}") from exc
    return SweepOutcome(config, csv_path, sorted(rows, key=_sort_key),
                        evaluated, skipped, faults)


class SweepIOError(OSError):
    """Raised when a sweep cannot read or write its artifacts."""


def _now_iso() -> str:
    import datetime

    return datetime.datetime.now(datetime.timezone.utc).isoformat(
        timespec="seconds")


def _write_meta(csv_path: Path, config: SweepConfig, times: dict,
                faults: dict) -> None:
    """Timestamps and faults live next to the table, not in it, so the CSV
    stays deterministic."""
    meta_path = csv_path.with_name(csv_path.name + ".meta.json")
    payload = {"schema": SCHEMA_VERSION, "config": config.digest(),
               "updated": _now_iso()}
    if meta_path.exists():
        try:
            old = json.loads(meta_path.read_text())
            payload["row_times"] = old.get("row_times", {})
            payload["faults"] = old.get("faults", {})
        except (json.JSONDecodeError, OSError):
            payload["row_times"], payload["faults"] = {}, {}
    else:
        payload["row_times"], payload["faults"] = {}, {}
    payload["row_times"].update(times)
    payload["faults"].update(faults)
    meta_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# figure presets


@dataclass(frozen=True)
class SeriesSpec:
    """One plotted curve: a row filter plus the column (or derived value)."""

    label: str
    gamma: float
    n: int
    state: str
    y: str                 # CSV column, "sep_indicator", or "eps1".."eps4"
    y_lo: str | None = None
    y_hi: str | None = None


@dataclass(frozen=True)
class FigurePreset:
    config: SweepConfig
    series: tuple
    comment: str


_G6 = (1.0, 0.8, 0.6, 0.4, 0.2, 0.1)
_G5 = (1.0, 0.8, 0.6, 0.4, 0.2)
_G4 = (1.0, 0.8, 0.6, 0.4)
_G10 = tuple(round(0.1 * i, 1) for i in range(1, 11))


def _glabel(g: float) -> str:
    return f"g{g:g}"


def _column_preset(fig: str, gammas, state: str, col: str, n: int = 1,
                   comment: str = "", lo: str | None = None,
                   hi: str | None = None) -> FigurePreset:
    cfg = SweepConfig(name=fig, gammas=gammas, ns=(n,), state_kinds=(state,),
                      preset=fig)
    series = tuple(
        SeriesSpec(f"{_glabel(g)}_{col}", g, n, state, col, lo, hi)
        for g in gammas)
    return FigurePreset(cfg, series, comment)


def _build_presets() -> dict:
    presets = {}
    presets["fig1"] = _column_preset(
        "fig1", _G6, BROKEN, "px", comment="x magnetization vs lambda")
    presets["fig2"] = _column_preset(
        "fig2", _G6, SYMMETRIC, "pz", comment="z magnetization vs lambda")
    presets["fig3"] = _column_preset(
        "fig3", _G6, SYMMETRIC, "pxx", comment="nearest-neighbor xx correlator")
    presets["fig4"] = _column_preset(
        "fig4", _G6, SYMMETRIC, "pyy", comment="nearest-neighbor yy correlator")
    presets["fig5"] = _column_preset(
        "fig5", _G6, SYMMETRIC, "pzz", comment="nearest-neighbor zz correlator")
    presets["fig6"] = _column_preset(
        "fig6", _G5, SYMMETRIC, "sep_indicator",
        comment="separability indicator; zero crossing marks the second "
                "critical point")
    presets["fig7"] = _column_preset(
        "fig7", _G6, BROKEN, "C_lo",
        comment="lower bound of nearest-neighbor concurrence, broken state")

    cfg8 = SweepConfig(name="fig8", gammas=_G5, ns=(1,),
                       state_kinds=(SYMMETRIC, BROKEN), preset="fig8")
    series8 = []
    for g in _G5:
        series8.append(SeriesSpec(f"{_glabel(g)}_C_lo", g, 1, BROKEN, "C_lo"))
        series8.append(SeriesSpec(f"{_glabel(g)}_C_hi", g, 1, BROKEN, "C_hi"))
        series8.append(SeriesSpec(f"{_glabel(g)}_C_sym", g, 1, SYMMETRIC, "C_lo"))
    presets["fig8"] = FigurePreset(
        cfg8, tuple(series8),
        "nearest-neighbor concurrence bounds (broken) and symmetric value")

    cfg9 = SweepConfig(name="fig9", gammas=(0.8,), ns=(1,),
                       state_kinds=(SYMMETRIC,), preset="fig9")
    presets["fig9"] = FigurePreset(
        cfg9,
        tuple(SeriesSpec(f"g0.8_eps{i}", 0.8, 1, SYMMETRIC, f"eps{i}")
              for i in range(1, 5)),
        "spin-flip spectrum branches, symmetric state; largest-branch "
        "crossing at the second critical point")

    cfg10 = SweepConfig(name="fig10", gammas=(0.8,), ns=(1,),
                        state_kinds=(BROKEN,), preset="fig10")
    presets["fig10"] = FigurePreset(
        cfg10,
        tuple(SeriesSpec(f"g0.8_eps{i}", 0.8, 1, BROKEN, f"eps{i}")
              for i in range(1, 5)),
        "spin-flip spectrum branches, broken state; all branches vanish at "
        "the second critical point")

    presets["fig11"] = _column_preset(
        "fig11", _G6, SYMMETRIC, "N_lo",
        comment="nearest-neighbor negativity, symmetric state")
    presets["fig12"] = _column_preset(
        "fig12", _G4, BROKEN, "C_lo", n=2,
        comment="next-nearest concurrence lower bound, broken state")

    cfg13 = SweepConfig(name="fig13", gammas=(0.2,), ns=(2,),
                        state_kinds=(SYMMETRIC, BROKEN), preset="fig13")
    presets["fig13"] = FigurePreset(
        cfg13,
        (SeriesSpec("g0.2_C_lo", 0.2, 2, BROKEN, "C_lo"),
         SeriesSpec("g0.2_C_hi", 0.2, 2, BROKEN, "C_hi"),
         SeriesSpec("g0.2_C_sym", 0.2, 2, SYMMETRIC, "C_lo")),
        "next-nearest concurrence bounds and symmetric value at gamma=0.2")

    presets["fig14"] = _column_preset(
        "fig14", _G6, SYMMETRIC, "N_lo", n=2,
        comment="next-nearest negativity, symmetric state")
    presets["fig15"] = _column_preset(
        "fig15", _G10, BROKEN, "G1",
        comment="one-site multipartite measure over the phase diagram, "
                "broken state")
    presets["fig16"] = _column_preset(
        "fig16", _G10, BROKEN, "G2_hi",
        comment="two-site multipartite measure (upper bound) over the phase "
                "diagram, broken state")

    cfg17 = SweepConfig(name="fig17", gammas=(1.0, 0.6, 0.2), ns=(1,),
                        state_kinds=(BROKEN,), preset="fig17")
    series17 = []
    for g in (1.0, 0.6, 0.2):
        series17.append(SeriesSpec(f"{_glabel(g)}_G2_lo", g, 1, BROKEN, "G2_lo"))
        series17.append(SeriesSpec(f"{_glabel(g)}_G2_hi", g, 1, BROKEN, "G2_hi"))
    presets["fig17"] = FigurePreset(
        cfg17, tuple(series17),
        "two-site multipartite measure bounds, broken state")

    def _compare(fig: str, col: str, comment: str) -> FigurePreset:
        cfg = SweepConfig(name=fig, gammas=(1.0, 0.4), ns=(1,),
                          state_kinds=(SYMMETRIC, BROKEN), preset=fig)
        series = []
        for g in (1.0, 0.4):
            series.append(
                SeriesSpec(f"{_glabel(g)}_sym", g, 1, SYMMETRIC, col))
            series.append(
                SeriesSpec(f"{_glabel(g)}_broken", g, 1, BROKEN, col))
        return FigurePreset(cfg, tuple(series), comment)

    presets["fig18"] = _compare(
        "fig18", "G1",
        "one-site multipartite measure, symmetric vs broken state")
    presets["fig19"] = _compare(
        "fig19", "G2_hi",
        "two-site multipartite measure, symmetric vs broken state")
    return presets


PRESETS = _build_presets()

#: Config keys a figure run may override without invalidating the preset's
#: pinned series (the grid shape itself is part of the figure definition).
ALLOWED_PRESET_OVERRIDES = frozenset({
    "lambda_start", "lambda_stop", "lambda_step",
    "out_dir", "ed_sites", "boundary",
})


def preset_job(preset_id: str, overrides: Mapping | None = None) -> SweepConfig:
    """The sweep job for a builtin figure preset, with safe overrides only."""
    if preset_id not in PRESETS:
        raise ConfigError(f"unknown preset {preset_id!r}; "
                          f"expected one of fig1..fig{len(PRESETS)}")
    overrides = dict(overrides or {})
    bad = set(overrides) - ALLOWED_PRESET_OVERRIDES
    if bad:
        raise ConfigError(
            f"preset {preset_id} pins its parameter grid; "
            f"cannot override {sorted(bad)}")
    return _apply_keys(PRESETS[preset_id].config, overrides)

def separability_indicator_from_row(row: SweepRow) -> float:
    """Separability indicator derived from a table row; its sign flips at
    the second critical point (positive below, negative above)."""
    disc = (1.0 + row.pzz) ** 2 - 4.0 * row.pz ** 2
    return math.sqrt(max(disc, 0.0)) + row.pzz - 2.0 * row.pyy - 1.0


def default_spectra(gamma: float, lam: float, n: int, state: str) -> tuple:
    """Spin-flip spectrum branches for figure emission (in-process route)."""
    report = entanglement_report(ModelParams(gamma, lam), n=n, state_kind=state)
    eps = report.r_spectrum_hi if state == BROKEN else report.r_spectrum_lo
    return tuple(eps)


def emit_figure(preset_id: str, rows: Sequence, out_dir,
                spectra: Callable | None = None) -> list:
    """Write per-series plot files (x, y, y_lo, y_hi) plus a gnuplot stub.

    Returns the list of written paths; an empty table writes nothing and
    logs a warning.  Output bytes depend only on the rows (and the preset),
    so identical inputs give identical files.
    """
    if preset_id not in PRESETS:
        raise ConfigError(f"unknown preset {preset_id!r}")
    preset = PRESETS[preset_id]
    if not rows:
        log.warning("preset %s: empty table, no figure data emitted", preset_id)
        return []
    spectra = spectra or default_spectra
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    dat_names = []
    labels = []
    for spec in preset.series:
        selected = sorted(
            (r for r in rows
             if r.gamma == spec.gamma and r.n == spec.n
             and r.state == spec.state),
            key=lambda r: r.lam)
        if not selected:
            continue
        lines = ["# x y y_lo y_hi"]
        for row in selected:
            if spec.y.startswith("eps"):
                idx = int(spec.y[3:]) - 1
                eps = spectra(row.gamma, row.lam, row.n, row.state)
                y = lo = hi = float(eps[idx])
            elif spec.y == "sep_indicator":
                y = lo = hi = separability_indicator_from_row(row)
            else:
                y = getattr(row, spec.y)
                lo = getattr(row, spec.y_lo) if spec.y_lo else y
                hi = getattr(row, spec.y_hi) if spec.y_hi else y
            lines.append(" ".join(_fmt(float(v)) for v in (row.lam, y, lo, hi)))
        path = out_dir / f"{preset_id}_{spec.label}.dat"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
        dat_names.append(path.name)
        labels.append(spec.label)
    if not written:
        log.warning("preset %s: no rows matched any series", preset_id)
        return []
    stub = [
        f"# {preset.comment}",
        "set terminal pngcairo size 900,600",
        f"set output '{preset_id}.png'",
        "set xlabel 'lambda'",
        "plot \\",
    ]
    plot_parts = [
        f"  '{name}' using 1:2 with lines title '{label}'"
        for name, label in zip(dat_names, labels)
    ]
    stub.append(", \\\n".join(plot_parts))
    gp_path = out_dir / f"{preset_id}.gp"
    gp_path.write_text("\n".join(stub) + "\n")
    written.append(gp_path)
    return written


# ---------------------------------------------------------------------------
# critical-point detection


@dataclass(frozen=True)
class CriticalEstimate:
    """Grid-resolution estimates of the two transition couplings."""

    gamma: float
    lambda1: float | None
    lambda1_uncertainty: float
    lambda1_from_multipartite: float | None
    lambda2: float | None
    lambda2_uncertainty: float
    flags: tuple


def _series(rows: Sequence, gamma: float, state: str, n: int, col: str):
    pts = sorted(((r.lam, getattr(r, col)) for r in rows
                  if r.gamma == gamma and r.state == state and r.n == n),
                 key=lambda t: t[0])
    lams = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    return lams, vals


def detect_critical_points(rows: Sequence, gamma: float) -> CriticalEstimate:
    """Estimate both transition couplings from a finished sweep table.

    The first coupling comes from the grid argmax of the central-difference
    |d concurrence / d lambda| on the symmetric nearest-neighbor series (with
    the broken-state one-site-measure argmax as a cross-check); the second
    from the interior minimum of the broken-state one-site measure, which
    touches zero there.  Uncertainties are one grid step; coarse or flat
    input is flagged rather than guessed at.
    """
    flags = []
    lams, c1 = _series(rows, gamma, SYMMETRIC, 1, "C_lo")
    step = float(np.min(np.diff(lams))) if lams.size > 1 else math.nan
    lambda1 = None
    l1_err = math.nan
    if lams.size < 5:
        flags.append("insufficient_grid")
    else:
        deriv = (c1[2:] - c1[:-2]) / (lams[2:] - lams[:-2])
        mag = np.abs(deriv)
        if not np.isfinite(mag).any() or np.nanmax(mag) < 1e-10:
            flags.append("flat")
        else:
            lambda1 = float(lams[1:-1][int(np.nanargmax(mag))])
            l1_err = step

    lam_b, g1_b = _series(rows, gamma, BROKEN, 1, "G1")
    lambda1_alt = None
    lambda2 = None
    l2_err = math.nan
    if lam_b.size >= 5 and np.isfinite(g1_b).any():
        lambda1_alt = float(lam_b[int(np.nanargmax(g1_b))])
        # the second critical point: interior zero-touch beyond the first
        sel = lam_b > 1.0 + 2.0 * (step if math.isfinite(step) else 0.01)
        if sel.sum() >= 3:
            lam_r, g1_r = lam_b[sel], g1_b[sel]
            i = int(np.nanargmin(g1_r))
            if 0 < i < lam_r.size - 1:
                lambda2 = float(lam_r[i])
                l2_err = step
                depth = 0.5 * (g1_r[i - 1] + g1_r[i + 1]) - g1_r[i]
                if not math.isfinite(depth) or depth < 1e-6:
                    flags.append("shallow_minimum")
                    l2_err = 2.0 * step
    return CriticalEstimate(gamma, lambda1, l1_err, lambda1_alt,
                            lambda2, l2_err, tuple(flags))


def critical_config(base: SweepConfig) -> SweepConfig:
    """Derive the sweep grid that critical-point detection needs."""
    return replace(base, name=f"{base.name}_critical_grid", ns=(1,),
                   state_kinds=(SYMMETRIC, BROKEN), preset=None)


CRITICAL_COLUMNS = ("gamma", "lambda1", "lambda1_err", "lambda1_alt",
                    "lambda2", "lambda2_err", "flags")


def write_critical_table(path, config: SweepConfig,
                         estimates: Sequence) -> None:
    """Deterministic CSV of critical-point estimates, one row per gamma."""
    path = Path(path)
    body = [header_line(config), ",".join(CRITICAL_COLUMNS)]
    for est in sorted(estimates, key=lambda e: e.gamma):
        vals = [
            est.gamma,
            math.nan if est.lambda1 is None else est.lambda1,
            est.lambda1_uncertainty,
            math.nan if est.lambda1_from_multipartite is None
            else est.lambda1_from_multipartite,
            math.nan if est.lambda2 is None else est.lambda2,
            est.lambda2_uncertainty,
            ";".join(est.flags),
        ]
        body.append(",".join(_fmt(v) for v in vals))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(body) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# decay-length fits


@dataclass(frozen=True)
class DecaySeries:
    """Separation series feeding the decay-length fits.

    g2 is the two-site multipartite measure vs n; pxx the xx correlator vs n;
    m_squared the known long-distance plateau of pxx.
    """

    ns: tuple
    g2: tuple
    pxx: tuple
    m_squared: float


@dataclass(frozen=True)
class FitResult:
    """Decay lengths of the two-site measure (xi_e) and correlator (xi_c)."""

    xi_e: float
    xi_c: float
    ratio: float
    g_inf: float
    residual_e: float
    residual_c: float
    window: tuple
    rejected_e: bool
    rejected_c: bool
    constant_e: bool
    constant_c: bool

    @property
    def rejected(self) -> bool:
        return self.rejected_e or self.rejected_c


def decay_series(params: ModelParams, state_kind: str = SYMMETRIC,
                 n_max: int = 20) -> DecaySeries:
    """Evaluate the G(2,n) and pxx_n series used by the length fits."""
    check_state_kind(state_kind)
    ns = tuple(range(1, n_max + 1))
    g2_vals, pxx_vals = [], []
    for n in ns:
        report = entanglement_report(params, n=n, state_kind=state_kind)
        g2_vals.append(report.g2.mid)
        pxx_vals.append(report.correlators.pxx)
    m2 = spontaneous_magnetization(params).value ** 2
    return DecaySeries(ns, tuple(g2_vals), tuple(pxx_vals), m2)


def _fit_toward_plateau(ns, ys) -> tuple:
    """Fit ys(n) = plateau -/+ A exp(-n/xi) with the plateau a free parameter.

    Returns (DecayFit, plateau).  The plateau search brackets the saturating
    side of the series; the inner problem is the closed-form log-linear fit.
    """
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    spread = float(ys.max() - ys.min())
    if spread < 1e-12:
        return (DecayFit(math.inf, 0.0, 0.0, (0, 0), rejected=False,
                         constant=True), float(ys[-1]))
    from_below = ys[-1] >= ys[0]

    def devs_for(plateau: float):
        return (plateau - ys) if from_below else (ys - plateau)

    def objective(t: float) -> float:
        margin = math.exp(t)
        plateau = (ys.max() + margin) if from_below else (ys.min() - margin)
        devs = devs_for(plateau)
        fit = fit_exponential_decay(ns, devs)
        if not math.isfinite(fit.max_rel_residual):
            return 1e6
        return fit.max_rel_residual

    # margin between ~1e-9*spread and ~100*spread, log-parametrized
    lo_t = math.log(spread) - 21.0
    hi_t = math.log(spread) + 4.6
    res = minimize_scalar(objective, bounds=(lo_t, hi_t), method="bounded",
                          options={"xatol": 1e-12})
    margin = math.exp(float(res.x))
    plateau = (ys.max() + margin) if from_below else (ys.min() - margin)
    fit = fit_exponential_decay(ns, devs_for(plateau))
    return fit, float(plateau)


def fit_entanglement_length(series: DecaySeries) -> FitResult:
    """Fit the decay lengths of G(2,n) toward its plateau and of pxx_n
    toward m_squared, and report their ratio.

    Non-exponential residual structure marks the corresponding fit rejected;
    an (effectively) constant series yields an infinite length with the
    constant flag set.
    """
    fit_e, g_inf = _fit_toward_plateau(series.ns, series.g2)
    devs_c = np.asarray(series.pxx, dtype=float) - series.m_squared
    fit_c = fit_exponential_decay(series.ns, np.abs(devs_c))
    ratio = math.nan
    if (math.isfinite(fit_e.length) and math.isfinite(fit_c.length)
            and not fit_e.rejected and not fit_c.rejected
            and fit_e.length > 0):
        ratio = fit_c.length / fit_e.length
    window = fit_e.window if fit_e.window != (0, 0) else fit_c.window
    return FitResult(
        xi_e=fit_e.length, xi_c=fit_c.length, ratio=ratio, g_inf=g_inf,
        residual_e=fit_e.max_rel_residual, residual_c=fit_c.max_rel_residual,
        window=window, rejected_e=fit_e.rejected, rejected_c=fit_c.rejected,
        constant_e=fit_e.constant, constant_c=fit_c.constant)


def fit_lengths_at(gamma: float, lam: float, state_kind: str = SYMMETRIC,
                   n_max: int = 20) -> FitResult:
    """Convenience wrapper: build the series at (gamma, lambda) and fit."""
    return fit_entanglement_length(
        decay_series(ModelParams(gamma, lam), state_kind, n_max))


# ---------------------------------------------------------------------------
# finite-chain comparison runner


ORACLE_QUANTITIES = ("px", "pz", "pxx", "pyy", "pzz", "pxy", "pyz")

ORACLE_COLUMNS = ("gamma", "lambda", "n", "sites", "quantity",
                  "thermodynamic", "ed", "diff")


@dataclass(frozen=True)
class OracleRow:
    gamma: float
    lam: float
    n: int
    sites: int
    quantity: str
    thermodynamic: float
    ed: float
    diff: float


def oracle_comparison(gamma: float, lam: float, n: int, sites: int = 12,
                      boundary: str = "periodic") -> list:
    """Compare thermodynamic-limit correlators against a finite chain.

    Diagonal correlators and the transverse magnetization use the symmetric
    ground state; the longitudinal magnetization uses the broken combination
    of the ground doublet.  The cross correlators are compared against their
    exact zero.
    """
    from . import ed

    params = ModelParams(gamma, lam)
    spec = ed.ChainSpec(N=sites, params=params, boundary=boundary)
    state = ed.ground_doublet(spec)
    psi_sym = state.vectors[:, 0]
    psi_broken, _notice = ed.broken_state(state)

    thermo_sym = correlator_set(n, params, SYMMETRIC)
    m_thermo = spontaneous_magnetization(params).value if lam > 1 else 0.0

    i, j = 0, n
    rows = []

    def add(quantity: str, thermo: float, value: float):
        rows.append(OracleRow(gamma, lam, n, sites, quantity,
                              float(thermo), float(value),
                              float(abs(value - thermo))))

    add("px", m_thermo, ed.site_magnetization(psi_broken, "x", 0, sites))
    add("pz", thermo_sym.pz, ed.site_magnetization(psi_sym, "z", 0, sites))
    add("pxx", thermo_sym.pxx,
        ed.correlator_measure(psi_sym, "x", "x", i, j, sites))
    add("pyy", thermo_sym.pyy,
        ed.correlator_measure(psi_sym, "y", "y", i, j, sites))
    add("pzz", thermo_sym.pzz,
        ed.correlator_measure(psi_sym, "z", "z", i, j, sites))
    add("pxy", 0.0, ed.correlator_measure(psi_sym, "x", "y", i, j, sites))
    add("pyz", 0.0, ed.correlator_measure(psi_sym, "y", "z", i, j, sites))
    return rows


def oracle_row_to_csv(row: OracleRow) -> str:
    vals = [row.gamma, row.lam, row.n, row.sites, row.quantity,
            row.thermodynamic, row.ed, row.diff]
    return ",".join(_fmt(v) for v in vals)


def write_oracle_table(path, config: SweepConfig, rows: Sequence) -> None:
    path = Path(path)
    body = [header_line(config), ",".join(ORACLE_COLUMNS)]
    body.extend(oracle_row_to_csv(r) for r in rows)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(body) + "\n")
    os.replace(tmp, path)
