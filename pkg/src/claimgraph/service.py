"""Suggestion-assisted annotation service.

Serves model-predicted graphs for unlabeled sentences and appends
human-corrected graphs to an annotation store, which a background retrain
folds back into the model:

    GET  /health       -> {"status", "model_version"} (503 before a model loads)
    GET  /next         -> next unlabeled sentence, 204 when the queue is empty
    POST /suggest      -> prediction for {"id": ...} or {"tokens": [...]}
    POST /annotations  -> append a corrected sentence (201 / 409 / 422)
    POST /retrain      -> 202; fine-tunes on the store and hot-swaps the model

The store file is append-only JSONL in the corpus format: each accepted
annotation is one complete, atomically flushed line, so the store re-parses
as a valid corpus after any crash.  Suggestions can be disabled per split
(``--no-suggest-splits test``) so held-out annotation stays unbiased.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .corpus import (
    AnnotatedSentence,
    Corpus,
    CorpusFormatError,
    parse_corpus,
    sentence_from_json,
    sentence_to_json,
    serialize_corpus,
)
from .model.network import InferenceConfig, predict
from .model.params import (
    checkpoint_hash,
    load_checkpoint_file,
    save_checkpoint,
)
from .model.providers import (
    PrecomputedEmbeddingProvider,
    ProviderError,
    TokenLookupProvider,
)
from .schema import validate_schema, validate_structural
from .training import TrainConfig, train

ENV_STORE = "CLAIMGRAPH_STORE"
ENV_CKPT = "CLAIMGRAPH_CKPT"


@dataclass
class ServiceConfig:
    checkpoint_path: str | None = None
    store_path: str = "store.jsonl"
    queue_path: str | None = None  # unlabeled sentences to annotate
    embeddings_path: str | None = None  # precomputed-provider mode
    no_suggest_splits: tuple[str, ...] = ()
    retrain_epochs: int = 5
    retrain_learning_rate: float = 5e-3
    seed: int = 0
    ui_dir: str | None = None


class AnnotationStore:
    """Append-only accepted-annotation log plus the unlabeled queue."""

    def __init__(self, store_path: str, queue: Corpus):
        self.store_path = Path(store_path)
        self.queue = queue
        self._lock = threading.Lock()
        self._accepted: dict[str, AnnotatedSentence] = {}
        if self.store_path.exists():
            for sent in parse_corpus(self.store_path.read_bytes()):
                self._accepted[sent.id] = sent

    def status(self, sid: str) -> str:
        return "accepted" if sid in self._accepted else "unlabeled"

    def accepted(self, sid: str) -> AnnotatedSentence | None:
        return self._accepted.get(sid)

    def accepted_corpus(self) -> Corpus:
        return Corpus(tuple(self._accepted.values()))

    def next_unlabeled(self) -> AnnotatedSentence | None:
        for sent in self.queue:
            if sent.id not in self._accepted:
                return sent
        return None

    def append(self, sent: AnnotatedSentence) -> None:
        line = serialize_corpus(Corpus((sent,)))
        with self._lock:
            with open(self.store_path, "ab") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._accepted[sent.id] = sent


@dataclass
class _ModelState:
    params: object | None = None
    provider: object | None = None
    version: str | None = None
    inference: InferenceConfig = field(default_factory=InferenceConfig)


def _provider_for(params, config: ServiceConfig):
    if params.vocab is not None:
        return TokenLookupProvider(params.vocab, params.dim)
    if config.embeddings_path:
        provider = PrecomputedEmbeddingProvider.from_file(config.embeddings_path)
        if provider.dim != params.dim:
            raise ValueError(
                f"embedding file dimension {provider.dim} does not match "
                f"checkpoint dimension {params.dim}")
        return provider
    raise ValueError("checkpoint has no vocabulary and no embeddings file was given")


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="claimgraph suggestion service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    queue = Corpus(())
    if config.queue_path:
        with open(config.queue_path, "rb") as fh:
            queue = parse_corpus(fh.read())
    store = AnnotationStore(config.store_path, queue)

    state = _ModelState()
    state_lock = threading.Lock()
    retrain_running = [False]

    if config.checkpoint_path and Path(config.checkpoint_path).exists():
        params, version = load_checkpoint_file(config.checkpoint_path)
        echo = params.config_echo.get("train_config", {})
        state.params = params
        state.provider = _provider_for(params, config)
        state.version = version
        state.inference = InferenceConfig(
            attr_threshold=echo.get("attr_threshold", 0.55),
            rel_threshold=echo.get("rel_threshold", 0.4),
            max_span_size=echo.get("max_span_size", params.max_span_size),
            span_repr_mode=echo.get("span_repr_mode", "attention"),
            attribute_filtering=echo.get("attribute_filtering", "cascaded"))

    app.state.store = store
    app.state.model = state

    def snapshot():
        with state_lock:
            return state.params, state.provider, state.version, state.inference

    @app.get("/health")
    def health():
        params, _, version, _ = snapshot()
        if params is None:
            return JSONResponse({"status": "no model loaded"}, status_code=503)
        return {"status": "ok", "model_version": version}

    @app.get("/next")
    def next_sentence():
        sent = store.next_unlabeled()
        if sent is None:
            return Response(status_code=204)
        return {"id": sent.id, "tokens": list(sent.graph.tokens),
                "split": sent.meta.split, "source": sent.meta.source,
                "suggestions_enabled": sent.meta.split not in config.no_suggest_splits}

    @app.post("/suggest")
    def suggest(body: dict = Body(...)):
        params, provider, _, inference = snapshot()
        if params is None:
            return JSONResponse({"error": "no model loaded"}, status_code=503)
        sid = body.get("id")
        tokens = body.get("tokens")
        if sid is not None:
            try:
                sent = store.queue.by_id(sid)
            except KeyError:
                return JSONResponse({"error": f"unknown sentence id {sid!r}"},
                                    status_code=404)
            if sent.meta.split in config.no_suggest_splits:
                return JSONResponse(
                    {"error": f"suggestions are disabled for split {sent.meta.split!r}"},
                    status_code=403)
            tokens = list(sent.graph.tokens)
        elif not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            return JSONResponse({"error": "tokens must be a list of strings"},
                                status_code=422)
        try:
            prediction = predict(tokens, provider, params, inference, sid=sid)
        except ProviderError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        out = prediction.to_json()
        out["id"] = sid
        return out

    @app.post("/annotations")
    def annotations(body: dict = Body(...)):
        try:
            sent = sentence_from_json(body)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        structural = validate_structural(sent.graph)
        if not structural.ok:
            return JSONResponse(
                {"error": "structural validation failed",
                 "errors": structural.lines()}, status_code=422)
        report = validate_schema(sent.graph)
        if not report.ok:
            return JSONResponse(
                {"error": "schema validation failed",
                 "errors": report.lines()[:len(report.errors)],
                 "warnings": [l for l in report.lines() if l.startswith("warning")]},
                status_code=422)
        existing = store.accepted(sent.id)
        if existing is not None:
            identical = sentence_to_json(existing) == sentence_to_json(sent)
            return JSONResponse(
                {"error": "already annotated", "id": sent.id,
                 "identical": identical}, status_code=409)
        store.append(sent)
        return JSONResponse(
            {"id": sent.id,
             "warnings": [l for l in report.lines() if l.startswith("warning")]},
            status_code=201)

    @app.post("/retrain")
    def retrain():
        params, provider, _, inference = snapshot()
        if params is None:
            return JSONResponse({"error": "no model loaded"}, status_code=503)
        accepted = [s for s in store.accepted_corpus() if s.meta.split != "test"]
        if not accepted:
            return JSONResponse({"error": "no accepted annotations to train on"},
                                status_code=422)
        with state_lock:
            if retrain_running[0]:
                return JSONResponse({"error": "a retrain is already running"},
                                    status_code=409)
            retrain_running[0] = True

        def run():
            try:
                echo = params.config_echo.get("train_config", {})
                cfg = TrainConfig(
                    epochs=config.retrain_epochs,
                    batch_size=echo.get("batch_size", 8),
                    learning_rate=config.retrain_learning_rate,
                    dropout=0.0, seed=config.seed, dim=params.dim,
                    max_span_size=params.max_span_size,
                    span_repr_mode=state.inference.span_repr_mode,
                    attribute_filtering=state.inference.attribute_filtering,
                    attrs_as_ents=params.label_mode == "attrs_as_ents",
                    attr_threshold=state.inference.attr_threshold,
                    rel_threshold=state.inference.rel_threshold)
                train_corpus = Corpus(tuple(accepted))
                new_params, _ = train(train_corpus, provider, cfg,
                                      val=Corpus(()), warm_start=params)
                data = save_checkpoint(new_params)
                if config.checkpoint_path:
                    tmp = str(config.checkpoint_path) + ".tmp"
                    with open(tmp, "wb") as fh:
                        fh.write(data)
                    os.replace(tmp, config.checkpoint_path)
                with state_lock:
                    state.params = new_params
                    state.version = checkpoint_hash(data)
            finally:
                with state_lock:
                    retrain_running[0] = False

        threading.Thread(target=run, daemon=True).start()
        return JSONResponse({"status": "retraining", "examples": len(accepted)},
                            status_code=202)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def config_from_env(**overrides) -> ServiceConfig:
    cfg = ServiceConfig()
    if os.environ.get(ENV_STORE):
        cfg.store_path = os.environ[ENV_STORE]
    if os.environ.get(ENV_CKPT):
        cfg.checkpoint_path = os.environ[ENV_CKPT]
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg
