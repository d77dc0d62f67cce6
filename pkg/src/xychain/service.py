"""Stateless HTTP compute service exposing the library's point operations.

Every endpoint is a pure function of its request body: correlator sets,
density-matrix assembly, off-diagonal-correlator bounds, entanglement
measures, magnetizations, energies, finite-chain comparisons, and decay-length
fits.  Sweep orchestration, CSV writing, and table post-processing stay in the
command-line client, which talks to this app either in-process or over the
network.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .correlators import (
    correlator_set,
    ground_state_energy_per_site,
    spontaneous_magnetization,
)
from .density_matrix import assemble_rho, validate_rho, xz_bounds
from .measures import entanglement_report
from .model import (
    BROKEN,
    InconsistentCorrelatorsError,
    ModelParams,
    NonPositiveStateError,
    ParameterDomainError,
    SYMMETRIC,
)
from .sweep import fit_lengths_at, oracle_comparison


def _clean(x: float) -> float | None:
    """JSON-safe float: non-finite values become null."""
    xf = float(x)
    return xf if math.isfinite(xf) else None


class PointRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    gamma: float
    lam: float = Field(alias="lambda")


class CorrelatorRequest(PointRequest):
    n: int = 1
    state: str = SYMMETRIC


class RhoRequest(CorrelatorRequest):
    q: float | None = None


class OracleRequest(PointRequest):
    n: int = 1
    sites: int = 12
    boundary: str = "periodic"


class FitlenRequest(PointRequest):
    state: str = SYMMETRIC
    n_max: int = 20


class IntervalModel(BaseModel):
    lo: float
    hi: float


class CorrelatorsResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    gamma: float
    lam: float = Field(alias="lambda")
    n: int
    state: str
    px: float
    pz: float
    pxx: float
    pyy: float
    pzz: float
    pxz: IntervalModel
    pxy: float
    pyz: float


class MeasuresResponse(BaseModel):
    correlators: CorrelatorsResponse
    concurrence: IntervalModel
    negativity: IntervalModel
    g1: float
    g2: IntervalModel
    branch: str
    energy: float
    r_spectrum_lo: list
    r_spectrum_hi: list
    pt_spectrum_lo: list
    pt_spectrum_hi: list
    flags: list


class RhoResponse(BaseModel):
    q: float
    matrix: list
    trace: float
    symmetry_residual: float
    min_eigenvalue: float
    psd: bool


class XzBoundsResponse(BaseModel):
    interval: IntervalModel
    flags: list
    feasible_runs: list


class MagnetizationResponse(BaseModel):
    value: float
    error: float
    flagged: bool
    ladder: list


class EnergyResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    gamma: float
    lam: float = Field(alias="lambda")
    value: float


class OracleEntry(BaseModel):
    quantity: str
    thermodynamic: float
    ed: float
    diff: float


class OracleResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    gamma: float
    lam: float = Field(alias="lambda")
    n: int
    sites: int
    rows: list


class FitlenResponse(BaseModel):
    xi_e: float | None
    xi_c: float | None
    ratio: float | None
    g_inf: float
    residual_e: float | None
    residual_c: float | None
    window: tuple
    rejected_e: bool
    rejected_c: bool
    constant_e: bool
    constant_c: bool
    rejected: bool


def _correlators_payload(cs) -> CorrelatorsResponse:
    return CorrelatorsResponse(
        gamma=cs.params.gamma, lam=cs.params.lam, n=cs.n, state=cs.state_kind,
        px=cs.px, pz=cs.pz, pxx=cs.pxx, pyy=cs.pyy, pzz=cs.pzz,
        pxz=IntervalModel(lo=cs.pxz.lo, hi=cs.pxz.hi),
        pxy=cs.pxy, pyz=cs.pyz)


def create_app() -> FastAPI:
    app = FastAPI(
        title="xychain compute service",
        version=__version__,
        description="Ground-state correlators, two-spin density matrices and "
                    "entanglement measures of the transverse-field XY chain.",
    )

    @app.exception_handler(ParameterDomainError)
    async def _domain_error(request: Request, exc: ParameterDomainError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(NonPositiveStateError)
    async def _state_error(request: Request, exc: NonPositiveStateError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(InconsistentCorrelatorsError)
    async def _bounds_error(request: Request,
                            exc: InconsistentCorrelatorsError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/correlators", response_model=CorrelatorsResponse)
    async def correlators(req: CorrelatorRequest):
        cs = correlator_set(req.n, ModelParams(req.gamma, req.lam), req.state)
        return _correlators_payload(cs)

    @app.post("/v1/rho", response_model=RhoResponse)
    async def rho(req: RhoRequest):
        cs = correlator_set(req.n, ModelParams(req.gamma, req.lam), req.state)
        if req.q is not None:
            q = req.q
        elif cs.state_kind == BROKEN:
            q = cs.pxz.mid
        else:
            q = 0.0
        dm = assemble_rho(cs, q)
        diag = validate_rho(dm.matrix)
        return RhoResponse(
            q=q, matrix=dm.matrix.tolist(), trace=diag.trace,
            symmetry_residual=diag.symmetry_residual,
            min_eigenvalue=diag.min_eigenvalue, psd=diag.psd)

    @app.post("/v1/xz-bounds", response_model=XzBoundsResponse)
    async def xz(req: CorrelatorRequest):
        cs = correlator_set(req.n, ModelParams(req.gamma, req.lam), req.state)
        if cs.state_kind == SYMMETRIC:
            return XzBoundsResponse(
                interval=IntervalModel(lo=0.0, hi=0.0),
                flags=["symmetric"], feasible_runs=[])
        result = xz_bounds(cs)
        return XzBoundsResponse(
            interval=IntervalModel(lo=result.interval.lo,
                                   hi=result.interval.hi),
            flags=list(result.flags),
            feasible_runs=[IntervalModel(lo=r.lo, hi=r.hi)
                           for r in result.feasible_runs])

    @app.post("/v1/measures", response_model=MeasuresResponse)
    async def measures(req: CorrelatorRequest):
        report = entanglement_report(ModelParams(req.gamma, req.lam),
                                     n=req.n, state_kind=req.state)
        return MeasuresResponse(
            correlators=_correlators_payload(report.correlators),
            concurrence=IntervalModel(lo=report.concurrence.lo,
                                      hi=report.concurrence.hi),
            negativity=IntervalModel(lo=report.negativity.lo,
                                     hi=report.negativity.hi),
            g1=report.g1,
            g2=IntervalModel(lo=report.g2.lo, hi=report.g2.hi),
            branch=report.branch, energy=report.energy,
            r_spectrum_lo=list(report.r_spectrum_lo),
            r_spectrum_hi=list(report.r_spectrum_hi),
            pt_spectrum_lo=list(report.pt_spectrum_lo),
            pt_spectrum_hi=list(report.pt_spectrum_hi),
            flags=list(report.flags))

    @app.post("/v1/magnetization", response_model=MagnetizationResponse)
    async def magnetization(req: PointRequest):
        est = spontaneous_magnetization(ModelParams(req.gamma, req.lam))
        return MagnetizationResponse(value=est.value, error=est.error,
                                     flagged=est.flagged,
                                     ladder=list(est.ladder))

    @app.post("/v1/energy", response_model=EnergyResponse)
    async def energy(req: PointRequest):
        value = ground_state_energy_per_site(ModelParams(req.gamma, req.lam))
        return EnergyResponse(gamma=req.gamma, lam=req.lam, value=value)

    @app.post("/v1/oracle", response_model=OracleResponse)
    async def oracle(req: OracleRequest):
        rows = oracle_comparison(req.gamma, req.lam, req.n,
                                 sites=req.sites, boundary=req.boundary)
        return OracleResponse(
            gamma=req.gamma, lam=req.lam, n=req.n, sites=req.sites,
            rows=[OracleEntry(quantity=r.quantity,
                              thermodynamic=r.thermodynamic,
                              ed=r.ed, diff=r.diff) for r in rows])

    @app.post("/v1/fitlen", response_model=FitlenResponse)
    async def fitlen(req: FitlenRequest):
        fit = fit_lengths_at(req.gamma, req.lam, req.state, req.n_max)
        return FitlenResponse(
            xi_e=_clean(fit.xi_e), xi_c=_clean(fit.xi_c),
            ratio=_clean(fit.ratio), g_inf=fit.g_inf,
            residual_e=_clean(fit.residual_e),
            residual_c=_clean(fit.residual_c),
            window=fit.window,
            rejected_e=fit.rejected_e, rejected_c=fit.rejected_c,
            constant_e=fit.constant_e, constant_c=fit.constant_c,
            rejected=fit.rejected)

    return app


app = create_app()
