"""HTTP gateway: one router behind `POST /classify` and `GET /stats`.

Incoming texts are embedded by a configurable embedder (the router never
embeds), served through the student/teacher gate, and the cache is persisted
on graceful shutdown. The oracle teacher is rejected here: live requests
carry no gold labels for it to echo.
"""

from __future__ import annotations

import itertools
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .cache import Cache
from .domain import EmbeddedInstance, Instance
from .embedding import HashedEmbedder
from .errors import ConfigError, FixtureMissError, TeacherUnavailableError
from .experiments import (
    ExperimentConfig,
    load_experiment_data,
    make_teacher,
    resolve_thresholds,
    router_config,
)
from .router import Router, make_student

Embedder = Callable[[str], np.ndarray]


class ClassifyRequest(BaseModel):
    text: str


def create_app(router: Router, embedder: Embedder, cache_path=None) -> FastAPI:
    request_ids = itertools.count(1)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if cache_path is not None:
            router.cache.save(cache_path)

    app = FastAPI(title="ocats gateway", lifespan=lifespan)

    @app.post("/classify")
    def classify(req: ClassifyRequest):
        try:
            instance = Instance(id=f"req-{next(request_ids)}", text=req.text)
            embedded = EmbeddedInstance(instance, embedder(instance.text))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        try:
            result = router.serve(embedded)
        except (TeacherUnavailableError, FixtureMissError) as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        return {
            "label": result.label,
            "source": result.source,
            "distance": result.distance,
            "entropy": result.entropy,
        }

    @app.get("/stats")
    def stats():
        n, m = router.n, router.m
        return {"N": n, "M": m, "rho": (m / n) if n else 0.0}

    return app


def build_gateway(config: ExperimentConfig, allow_paid: bool = False) -> FastAPI:
    """Assemble the serving app from an experiment config: label space and
    teacher demos from the dataset, thresholds for the first lambda, cache
    resumed from disk when present."""
    if config.teacher.kind == "oracle":
        raise ConfigError(
            "the oracle teacher needs gold labels and cannot serve live "
            "traffic; use a replay or live teacher"
        )
    config.check_input_files(need_test=False)
    data = load_experiment_data(config)
    settings = config.gateway
    embedder = HashedEmbedder(dim=settings.embed_dim, seed=settings.embed_seed)

    cache_path = Path(settings.cache_path) if settings.cache_path else None
    if cache_path is not None and cache_path.exists():
        cache = Cache.load(cache_path)
        if cache.dim != settings.embed_dim:
            raise ConfigError(
                f"cache at {cache_path} has dim {cache.dim}, embedder "
                f"produces {settings.embed_dim}"
            )
    else:
        cache = Cache(data.label_space, settings.embed_dim)

    lam = config.lambdas[0]
    thresholds = resolve_thresholds(config)[_first_key(config)]
    rc = router_config(config, thresholds, lam)
    student = make_student(rc, data.label_space)
    teacher = make_teacher(config, data, allow_paid)
    router = Router(cache, student, teacher, thresholds)
    return create_app(router, embedder, cache_path=cache_path)


def _first_key(config: ExperimentConfig) -> str:
    return repr(float(config.lambdas[0]))
