"""FastAPI application exposing the pulse compiler to multiple clients.

Run with: uvicorn ionpulse.service.app:app
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..chain import FIXTURE_SIZES
from ..errors import ConfigError, IonPulseError
from . import handlers, schemas

app = FastAPI(title="ionpulse", version="0.1.0",
              description="Parallel entangling-gate pulse compiler and verifier")


def _guarded(fn, request):
    try:
        return fn(request)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except IonPulseError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/fixtures")
def fixtures() -> dict:
    return {"sizes": list(FIXTURE_SIZES)}


@app.post("/modes", response_model=schemas.ModesResponse)
def modes(request: schemas.ModesRequest) -> schemas.ModesResponse:
    return _guarded(handlers.handle_modes, request)


@app.post("/synthesize", response_model=schemas.SynthesizeResponse)
def synthesize(request: schemas.SynthesizeRequest) -> schemas.SynthesizeResponse:
    return _guarded(handlers.handle_synthesize, request)


@app.post("/verify", response_model=schemas.VerificationSummary)
def verify(request: schemas.VerifyRequest) -> schemas.VerificationSummary:
    return _guarded(handlers.handle_verify, request)


@app.post("/calibrate", response_model=schemas.CalibrateResponse)
def calibrate(request: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
    return _guarded(handlers.handle_calibrate, request)
