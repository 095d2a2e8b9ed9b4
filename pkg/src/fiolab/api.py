"""
HTTP service around the harness. Serve with ``uvicorn fiolab.api:app``.

Runs execute synchronously in the request; the report returned is the same
document the command line writes to ``report.json``.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from . import endpoints as ep
from .harness import EXPERIMENTS, ExperimentConfig, HarnessError, RunReport, run, run_acceptance

app = FastAPI(title="fiolab", version=__version__)


class SuiteRequest(BaseModel):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    only: Optional[List[int]] = None


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/experiments")
def experiments():
    return {"experiments": list(EXPERIMENTS)}


@app.post("/run", response_model=RunReport)
def run_experiment(cfg: ExperimentConfig):
    try:
        return run(cfg)
    except HarnessError as err:
        raise HTTPException(status_code=400, detail=err.to_dict())


@app.post("/suite/acceptance")
def acceptance(req: SuiteRequest):
    try:
        body, _ = run_acceptance(req.seed, req.only, echo=None)
    except KeyError as exc:
        raise HTTPException(status_code=400, detail={"error": "usage", "message": f"no criterion {exc}",
                                                     "hint": "criteria are numbered 1 to 12"})
    return body


@app.get("/endpoints/{N}")
def endpoints(N: int, n: int = 2):
    if N < 2:
        raise HTTPException(status_code=400, detail={"error": "usage", "message": "need N >= 2",
                                                     "hint": ""})
    return [dict(t.to_dict(), critical_order=ep.critical_order(n, t)) for t in ep.enumerate_endpoints(N)]
