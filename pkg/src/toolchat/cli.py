"""Command-line interface: bench, chat, build-docs, serve.

Exit codes: 0 success, 2 dataset/parse errors, 3 backend errors.  With
``--format json`` errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import RemoteChatBackend, ScriptedBackend
from .benchmark import load_dataset, run_benchmark, write_dump, write_report
from .config import Settings
from .errors import (
    BackendTimeout,
    BackendUnavailable,
    DatasetParseError,
    MissingField,
    ParseError,
    InvariantViolation,
    ToolchatError,
)
from .genprompts import GenerationPromptSpec, render_generation_prompt
from .integration import load_shape_model, load_vertex_part_map
from .invocation import ToolInvocation
from .mocks import build_mock_adapters
from .pipeline import ChatPipeline
from .registry import (
    QAPair,
    ToolDocument,
    default_catalog,
    load_catalog,
)
from .retrieval import DeterministicEmbedder, RemoteEmbedder, build_index

EXIT_OK = 0
EXIT_DATA = 2
EXIT_BACKEND = 3


def _emit_error(message: str, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps({"error": message}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)


def _make_backend(spec: str, settings: Settings):
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec.split(":", 1)[1])
    if spec == "remote":
        if not settings.llm_endpoint:
            raise BackendUnavailable("TOOLCHAT_LLM_ENDPOINT is not configured")
        return RemoteChatBackend(
            endpoint=settings.llm_endpoint,
            model=settings.llm_model,
            api_key=settings.llm_api_key or None,
            temperature=settings.temperature,
            timeout=settings.llm_timeout,
        )
    raise BackendUnavailable(f"unknown backend spec {spec!r} (use scripted:FILE or remote)")


def _load_catalog(path: str | None, settings: Settings):
    if path:
        return load_catalog(path)
    if settings.catalog_path:
        return load_catalog(settings.catalog_path)
    return default_catalog()


def _make_embedder(settings: Settings):
    if settings.embed_endpoint:
        return RemoteEmbedder(
            endpoint=settings.embed_endpoint,
            model=settings.embed_model,
            api_key=settings.embed_api_key or None,
        )
    return DeterministicEmbedder(dim=settings.embed_dim)


def _build_pipeline(catalog, backend, settings: Settings) -> ChatPipeline:
    embedder = _make_embedder(settings)
    index = None
    documents = list(catalog.documents.values())
    if documents:
        index = build_index(embedder, documents)
    vertex_map = (
        load_vertex_part_map(settings.vertex_map_path) if settings.vertex_map_path else None
    )
    shape_model = (
        load_shape_model(settings.shape_model_path) if settings.shape_model_path else None
    )
    return ChatPipeline(
        catalog=catalog,
        backend=backend,
        adapters=build_mock_adapters(catalog),
        index=index,
        vertex_map=vertex_map,
        shape_model=shape_model,
    )


def cmd_bench(args, settings: Settings) -> int:
    try:
        catalog = _load_catalog(args.catalog, settings)
        dataset = load_dataset(args.dataset)
    except (DatasetParseError, ParseError, MissingField, InvariantViolation) as e:
        _emit_error(str(e), args.format)
        return EXIT_DATA
    try:
        backend = _make_backend(args.backend, settings)
    except (BackendUnavailable, BackendTimeout) as e:
        _emit_error(str(e), args.format)
        return EXIT_BACKEND
    index = None
    documents = list(catalog.documents.values())
    if documents and not args.no_retrieval:
        index = build_index(_make_embedder(settings), documents)
    run = run_benchmark(
        dataset,
        catalog,
        backend,
        index=index,
        bleu_threshold=args.bleu_threshold,
    )
    out = Path(args.out)
    write_report(run, out)
    dump_path = out.with_suffix(out.suffix + ".dump.jsonl")
    write_dump(run, dump_path)
    print(json.dumps(run.report.as_dict(), indent=2, sort_keys=True))
    print(f"report: {out}\ndump: {dump_path}")
    return EXIT_OK


def cmd_chat(args, settings: Settings) -> int:
    try:
        catalog = _load_catalog(args.catalog, settings)
        backend = _make_backend(args.backend, settings)
    except (DatasetParseError, ParseError, MissingField, InvariantViolation) as e:
        _emit_error(str(e), args.format)
        return EXIT_DATA
    except (BackendUnavailable, BackendTimeout) as e:
        _emit_error(str(e), args.format)
        return EXIT_BACKEND
    pipeline = _build_pipeline(catalog, backend, settings)
    history: list[tuple[str, str]] = []
    images: list[str] = []
    print("toolchat REPL; /image <ref> attaches an image, /quit exits.")
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            return EXIT_OK
        if not line:
            continue
        if line == "/quit":
            return EXIT_OK
        if line.startswith("/image "):
            images.append(line.split(" ", 1)[1])
            print(f"attached image_{len(images) - 1}")
            continue
        answer = None
        for event in pipeline.run_turn(line, images=tuple(images), history=tuple(history)):
            if event.kind == "answer":
                answer = event.payload["text"]
            elif args.verbose:
                print(f"  [{event.kind}] {json.dumps(event.payload)[:200]}")
        history.append(("user", line))
        history.append(("assistant", answer or ""))
        print(f"bot> {answer}")


def cmd_build_docs(args, settings: Settings) -> int:
    try:
        paper_text = Path(args.paper_text).read_text(encoding="utf-8")
    except OSError as e:
        _emit_error(str(e), args.format)
        return EXIT_DATA
    prompt = render_generation_prompt(
        GenerationPromptSpec(template_id="toolcard_from_paper", slots={"paper_text": paper_text})
    )
    if not args.backend:
        print(prompt)
        return EXIT_OK
    try:
        backend = _make_backend(args.backend, settings)
        reply = backend.complete(prompt, {"tool": args.tool})
    except (BackendUnavailable, BackendTimeout) as e:
        _emit_error(str(e), args.format)
        return EXIT_BACKEND
    queries = [
        line.strip().lstrip("0123456789.) ")
        for line in reply.splitlines()
        if line.strip() and line.strip()[0].isdigit()
    ]
    doc = ToolDocument(
        tool_name=args.tool,
        qa_pairs=tuple(
            QAPair(
                query=q,
                gold=ToolInvocation(use_tool=True, action=args.tool, raw_input="example.jpg"),
            )
            for q in queries
        ),
    )
    payload = {
        "tool_name": doc.tool_name,
        "qa_pairs": [
            {
                "query": p.query,
                "invocation": {
                    "thought": True,
                    "action": args.tool,
                    "action_input": "example.jpg",
                },
            }
            for p in doc.qa_pairs
        ],
    }
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {len(doc.qa_pairs)} draft pairs to {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args, settings: Settings) -> int:
    import uvicorn

    from .service import create_app

    try:
        catalog = _load_catalog(args.catalog, settings)
        backend = _make_backend(args.backend, settings) if args.backend else None
    except (DatasetParseError, ParseError, MissingField, InvariantViolation) as e:
        _emit_error(str(e), args.format)
        return EXIT_DATA
    except (BackendUnavailable, BackendTimeout) as e:
        _emit_error(str(e), args.format)
        return EXIT_BACKEND
    if backend is None:
        _emit_error("serve requires --backend (scripted:FILE or remote)", args.format)
        return EXIT_BACKEND
    pipeline = _build_pipeline(catalog, backend, settings)
    app = create_app(pipeline, persist_dir=settings.persist_dir or None)
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolchat")
    parser.add_argument("--format", choices=["text", "json"], default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run a benchmark dataset and write report + dump")
    bench.add_argument("--dataset", required=True)
    bench.add_argument("--catalog", default=None)
    bench.add_argument("--backend", required=True, help="scripted:FILE or remote")
    bench.add_argument("--out", required=True, help="report path; dump goes next to it")
    bench.add_argument("--bleu-threshold", type=float, default=0.5)
    bench.add_argument("--no-retrieval", action="store_true")

    chat = sub.add_parser("chat", help="interactive REPL over the pipeline")
    chat.add_argument("--catalog", default=None)
    chat.add_argument("--backend", required=True)
    chat.add_argument("--verbose", action="store_true")

    docs = sub.add_parser("build-docs", help="render the tool-document prompt for a paper text")
    docs.add_argument("--paper-text", required=True)
    docs.add_argument("--tool", required=True)
    docs.add_argument("--backend", default=None)
    docs.add_argument("--out", default=None)

    serve = sub.add_parser("serve", help="start the HTTP chat service")
    serve.add_argument("--addr", default="127.0.0.1:8080")
    serve.add_argument("--catalog", default=None)
    serve.add_argument("--backend", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = Settings.from_env()
    try:
        if args.command == "bench":
            return cmd_bench(args, settings)
        if args.command == "chat":
            return cmd_chat(args, settings)
        if args.command == "build-docs":
            return cmd_build_docs(args, settings)
        if args.command == "serve":
            return cmd_serve(args, settings)
    except (BackendUnavailable, BackendTimeout) as e:
        _emit_error(str(e), args.format)
        return EXIT_BACKEND
    except ToolchatError as e:
        _emit_error(str(e), args.format)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
