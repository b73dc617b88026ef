import socket
import threading
import time

import pytest


def make_pairs(n=10):
    from confuse_trainer.data import Pair

    return [Pair(case_id="yoga",
                 prompt="Question: locate the best yoga class in my city\n"
                        "Inquiry:",
                 chosen="Which city are you in?",
                 rejected=f"What color is the sky {i}?",
                 provenance="seed")
            for i in range(n)]


def build_env_app(correct="no"):
    """The real environment service over a scripted gateway, plus a
    request counter. Returns (app, counts).

    ``correct`` scripts the judge's correctness verdict, which decides
    whether labeled inquiries come back chosen or rejected.
    """
    from confuse.dpo import LabelingContext, build_environment_app
    from confuse.gateway import Gateway, ModelRef, ScriptedBackend
    from confuse.model import (Case, Dataset, Document, Split,
                               UncertaintySource)

    doc = Document(doc_id="y1", title="",
                   body="Yoga classes in New York run daily.", is_gold=True)
    case = Case(
        id="yoga", dataset=Dataset.AMBIGQA,
        original_query="locate the best yoga class in New York",
        actual_query="locate the best yoga class in my city",
        gold_documents=(doc,), actual_documents=(doc,),
        clarification="the city is New York",
        gold_answer="the Central Park yoga class",
        label=UncertaintySource.AMBIGUITY, split=Split.TRAINING)

    backend = ScriptedBackend.from_rules([
        ("Original Intention:", "the city is New York"),
        ("Inquiry History:", "some answer"),
        (r"\"correct\"", '{"correct": "%s"}' % correct),
        (r"\"better\"", '{"better": "A"}'),
    ])
    model = ModelRef(name="m", endpoint="https://example.test/v1")
    ctx = LabelingContext(gateway=Gateway(backend), answer_model=model,
                          judge=model, user_sim=model)
    app = build_environment_app(ctx, {"yoga": case})

    counts = {"label": 0, "pair": 0}

    @app.middleware("http")
    async def count_calls(request, call_next):
        if request.url.path == "/v1/label":
            counts["label"] += 1
        elif request.url.path == "/v1/pair":
            counts["pair"] += 1
        return await call_next(request)

    return app, counts


@pytest.fixture
def served_env():
    """Serve the environment app on a free local port for the duration of
    a test; yields (base_url, counts)."""
    import uvicorn

    app, counts = build_env_app()
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()

    config = uvicorn.Config(app, host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("environment server did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}", counts
    server.should_exit = True
    thread.join(timeout=5)
