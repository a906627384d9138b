"""FastAPI service for the online mode.

Serves solution predictions from a task-model document and grid-based
quantile scoring, so a long-lived process can answer many clients without
re-running any optimization.  Run with::

    uvicorn pmto.service:app
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .evaluation import DEFAULT_ALPHAS, evaluate_task_model, quantiles, sobol_grid
from .problems import get_problem, list_problems
from .task_model import predict_solution_batch, task_model_from_dict

app = FastAPI(title="pmto", version=__version__)


class TaskModelDocument(BaseModel):
    solution_bounds: list
    theta_bounds: list
    records: list
    hyperparams: list


class PredictRequest(BaseModel):
    model: TaskModelDocument
    thetas: list[list[float]] = Field(min_length=1)


class PredictResponse(BaseModel):
    solutions: list[list[float]]


class EvaluateRequest(BaseModel):
    model: TaskModelDocument
    problem: str
    k: int = Field(default=400, ge=1)
    seed: int = 0


class EvaluateResponse(BaseModel):
    alphas: list[float]
    quantiles: list[float]
    k: int


def _rebuild(doc: TaskModelDocument):
    try:
        return task_model_from_dict(doc.model_dump())
    except (KeyError, ValueError, IndexError) as exc:
        raise HTTPException(status_code=422,
                            detail=f"invalid task model document: {exc}")


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/problems")
def problems():
    return {"problems": list_problems()}


@app.post("/predict", response_model=PredictResponse)
def predict(req: PredictRequest):
    model = _rebuild(req.model)
    if any(len(t) != model.task_dim for t in req.thetas):
        raise HTTPException(status_code=422,
                            detail=f"each theta must have {model.task_dim} "
                                   f"coordinates")
    xs = predict_solution_batch(model, req.thetas)
    return PredictResponse(solutions=[[float(v) for v in x] for x in xs])


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest):
    try:
        problem = get_problem(req.problem)
    except KeyError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    model = _rebuild(req.model)
    if model.task_dim != problem.task_dim:
        raise HTTPException(status_code=422,
                            detail="task model and problem dimensions differ")
    grid = sobol_grid(problem, req.k, seed=req.seed)
    values = evaluate_task_model(model, problem, grid)
    return EvaluateResponse(alphas=list(DEFAULT_ALPHAS),
                            quantiles=[float(q) for q in quantiles(values)],
                            k=req.k)
