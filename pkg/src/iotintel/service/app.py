"""FastAPI application exposing the engine under /v1."""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel

from iotintel import __version__
from iotintel.corpus.ingest import TabularParseError
from iotintel.evalharness import ScoreParseError
from iotintel.llmgateway import GatewayError
from iotintel.orchestrator import OrchestratorError
from iotintel.service.engine import (
    AssistantEngine,
    EngineError,
    UnknownDatasetError,
    UnknownRoleError,
)


class QueryBody(BaseModel):
    role: str
    query: str


class IngestBody(BaseModel):
    dataset_id: str
    path: Optional[str] = None
    data: Optional[str] = None


class CompareBody(BaseModel):
    role: str
    question: str


def create_app(engine: AssistantEngine,
               api_token: str | None = None) -> FastAPI:
    app = FastAPI(title="iotintel", version=__version__)

    def check_auth(authorization: Optional[str] = Header(None)) -> None:
        if api_token is None:
            return
        if authorization != f"Bearer {api_token}":
            raise HTTPException(status_code=401, detail="missing or bad token")

    guarded = [Depends(check_auth)]

    @app.get("/v1/health")
    def health() -> dict:
        # health stays reachable without a token so probes keep working
        return engine.health()

    @app.get("/v1/retrievers", dependencies=guarded)
    def retrievers() -> dict:
        return {"retrievers": engine.retriever_info()}

    @app.get("/v1/roles", dependencies=guarded)
    def roles() -> dict:
        return {"roles": engine.role_info()}

    @app.post("/v1/query", dependencies=guarded)
    def query(body: QueryBody) -> dict:
        try:
            return engine.ask(body.role, body.query).to_dict()
        except UnknownRoleError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except OrchestratorError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc

    @app.post("/v1/ingest", dependencies=guarded)
    def ingest(body: IngestBody) -> dict:
        try:
            summary = engine.ingest(body.dataset_id, path=body.path,
                                    data=body.data)
        except UnknownDatasetError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except (EngineError, TabularParseError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400,
                                detail=f"file not found: {exc}") from exc
        return summary.to_dict()

    @app.post("/v1/eval/compare", dependencies=guarded)
    def eval_compare(body: CompareBody) -> dict:
        try:
            return engine.compare(body.role, body.question)
        except UnknownRoleError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except (OrchestratorError, GatewayError, ScoreParseError) as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc

    return app
