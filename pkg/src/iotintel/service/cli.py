"""Command-line entry point.

Providers come from one of three mutually exclusive sources: a named HTTP
profile from the config file, a recorded transcript (replay), or a scripted
response file. Any of them can additionally be recorded to a transcript.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from iotintel.chunking import (
    SPLITTERS,
    EvaluationError,
    LlmRelevanceJudge,
    load_testset,
    optimize,
    report_csv,
    report_text,
)
from iotintel.corpus.ingest import build_documents, parse_tabular_dataset
from iotintel.evalharness import aggregate, load_question_bank, run_bank
from iotintel.llmgateway import (
    ChatProvider,
    GatewayError,
    HttpChatProvider,
    ReplayProvider,
    ScriptedProvider,
    TranscriptRecorder,
    ask,
    save_transcript,
)
from iotintel.service.config import AppConfig, ConfigError, load_config
from iotintel.service.engine import AssistantEngine, EngineError

# default sweep: 4 sizes x 4 overlaps x 3 splitters = 48 cells
DEFAULT_SIZES = (500, 1000, 1500, 2000)
DEFAULT_OVERLAPS = (50, 100, 150, 200)


class CliError(Exception):
    pass


class _NullProvider:
    """Placeholder for commands that never call the model."""

    name = "null"
    default_model = "null"

    def complete(self, request):
        raise GatewayError(self.name, 1,
                           detail="no provider configured; pass --provider, "
                                  "--replay, or --scripted")


def _load_scripted(path: str) -> ScriptedProvider:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise CliError("scripted file must hold a JSON object")
    default = data.pop("__default__", None)
    responses = data.get("responses", data)
    return ScriptedProvider(dict(responses), default=default)


def resolve_provider(args: argparse.Namespace,
                     config: AppConfig) -> ChatProvider:
    chosen = [name for name in ("provider", "replay", "scripted")
              if getattr(args, name, None)]
    if len(chosen) > 1:
        raise CliError("pass at most one of --provider, --replay, --scripted")
    if getattr(args, "replay", None):
        provider: ChatProvider = ReplayProvider.from_file(args.replay)
    elif getattr(args, "scripted", None):
        provider = _load_scripted(args.scripted)
    elif getattr(args, "provider", None):
        profile = config.providers.get(args.provider)
        if profile is None:
            raise CliError(f"no provider profile named {args.provider!r} in "
                           f"config (have: {sorted(config.providers)})")
        provider = HttpChatProvider(profile)
    else:
        provider = _NullProvider()
    if getattr(args, "record", None):
        provider = TranscriptRecorder(provider)
    return provider


def _finish_recording(provider: ChatProvider,
                      args: argparse.Namespace) -> None:
    if isinstance(provider, TranscriptRecorder) and args.record:
        save_transcript(provider.entries, args.record)


def _engine(args: argparse.Namespace, config: AppConfig,
            provider: ChatProvider) -> AssistantEngine:
    engine = AssistantEngine.from_config(config, provider)
    for pair in getattr(args, "ingest", None) or ():
        dataset_id, _, path = pair.partition("=")
        if not path:
            raise CliError(f"--ingest wants dataset=path, got {pair!r}")
        engine.ingest(dataset_id, path=path)
    return engine


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", help="provider profile name from config")
    parser.add_argument("--replay", help="transcript file to replay from")
    parser.add_argument("--scripted",
                        help="JSON file of request-hash to response text")
    parser.add_argument("--record", help="write a transcript of all LLM calls")


def _add_ingest_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ingest", action="append", metavar="DATASET=PATH",
                        help="ingest a dataset file before running "
                             "(repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotintel",
        description="IoT threat-intelligence assistant")
    parser.add_argument("--config", help="path to JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a dataset file into the corpus")
    p.add_argument("dataset")
    p.add_argument("path")

    p = sub.add_parser("optimize-chunks",
                       help="sweep chunking strategies against a testset")
    p.add_argument("dataset")
    p.add_argument("testset")
    p.add_argument("--file", required=True,
                   help="raw dataset file to build documents from")
    p.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    p.add_argument("--overlaps", default=",".join(map(str, DEFAULT_OVERLAPS)))
    p.add_argument("--splitters", default=",".join(SPLITTERS))
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--report", choices=("text", "csv"), default="text")
    _add_provider_flags(p)

    p = sub.add_parser("ask", help="answer one query")
    p.add_argument("query")
    p.add_argument("--role", required=True)
    p.add_argument("--json", action="store_true",
                   help="print the full response object, not just the text")
    _add_provider_flags(p)
    _add_ingest_flag(p)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    _add_provider_flags(p)

    p = sub.add_parser("eval", help="pairwise-judge a question bank")
    p.add_argument("--questions", required=True)
    p.add_argument("--judge", help="provider profile name for the judge; "
                                   "defaults to the answering provider")
    p.add_argument("--csv", help="also write the report as CSV to this path")
    _add_provider_flags(p)
    _add_ingest_flag(p)

    p = sub.add_parser("replay", help="re-run a recorded session offline")
    p.add_argument("transcript")
    p.add_argument("--role", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--json", action="store_true")
    _add_ingest_flag(p)

    return parser


def _cmd_ingest(args, config) -> int:
    engine = AssistantEngine.from_config(config, _NullProvider())
    summary = engine.ingest(args.dataset, path=args.path)
    print(json.dumps(summary.to_dict(), indent=1, sort_keys=True))
    return 0


def _cmd_optimize(args, config) -> int:
    provider = resolve_provider(args, config)
    engine = AssistantEngine.from_config(config, provider)
    descriptor = engine.descriptors.get(args.dataset)
    if descriptor is None:
        raise CliError(f"unknown dataset {args.dataset!r}")
    warnings: list[str] = []
    records = parse_tabular_dataset(Path(args.file).read_bytes(), descriptor,
                                    warnings)
    docs = build_documents(records, descriptor, warnings)
    testset = load_testset(args.testset)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    overlaps = [int(s) for s in args.overlaps.split(",") if s]
    splitters = [s for s in args.splitters.split(",") if s]
    judge = LlmRelevanceJudge(provider)
    best, scores = optimize(docs, sizes, overlaps, splitters, testset,
                            engine.embedder, judge, k=args.k)
    render = report_csv if args.report == "csv" else report_text
    print(render(scores))
    print(f"best: splitter={best.splitter} size={best.size} "
          f"overlap={best.overlap}")
    _finish_recording(provider, args)
    return 0


def _cmd_ask(args, config) -> int:
    provider = resolve_provider(args, config)
    engine = _engine(args, config, provider)
    result = engine.ask(args.role, args.query)
    if args.json:
        print(json.dumps(result.to_dict(), indent=1, sort_keys=True))
    else:
        print(result.text)
    _finish_recording(provider, args)
    return 0


def _cmd_serve(args, config) -> int:
    import uvicorn

    from iotintel.service.app import create_app

    provider = resolve_provider(args, config)
    engine = AssistantEngine.from_config(config, provider)
    token = None
    if config.api_token_env:
        token = os.environ.get(config.api_token_env)
        if not token:
            raise CliError(f"api_token_env {config.api_token_env!r} is not "
                           f"set in the environment")
    app = create_app(engine, api_token=token)
    uvicorn.run(app, host=args.host or config.host,
                port=args.port or config.port)
    return 0


def _cmd_eval(args, config) -> int:
    provider = resolve_provider(args, config)
    engine = _engine(args, config, provider)
    items = load_question_bank(args.questions)
    if args.judge:
        profile = config.providers.get(args.judge)
        if profile is None:
            raise CliError(f"no provider profile named {args.judge!r}")
        judge: ChatProvider = HttpChatProvider(profile)
    else:
        judge = provider
    runs = run_bank(items,
                    lambda role, q: engine.ask(role, q).text,
                    lambda role, q: ask(provider, q),
                    judge)
    report = aggregate(runs)
    print(report.to_markdown())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _finish_recording(provider, args)
    return 0


def _cmd_replay(args, config) -> int:
    provider = ReplayProvider.from_file(args.transcript)
    engine = _engine(args, config, provider)
    result = engine.ask(args.role, args.query)
    if args.json:
        print(json.dumps(result.to_dict(), indent=1, sort_keys=True))
    else:
        print(result.text)
    return 0


COMMANDS = {
    "ingest": _cmd_ingest,
    "optimize-chunks": _cmd_optimize,
    "ask": _cmd_ask,
    "serve": _cmd_serve,
    "eval": _cmd_eval,
    "replay": _cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except (CliError, ConfigError, EngineError, EvaluationError,
            GatewayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
