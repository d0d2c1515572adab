"""Operator command line: generate, inspect, retrieve, evaluate, simulate, serve.

Exit codes: 0 success, 1 partial failure (e.g. some generation items
rejected), 2 usage or input errors. Machine-readable output goes to stdout
as JSON or CSV; diagnostics go to stderr. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from pathlib import Path

from . import db as dbmod
from . import navsim, reports, retrieval, server
from .backends import (
    BackendError,
    DegradedOracleBackend,
    EncoderBackend,
    HttpEncoderBackend,
    PerfectOracleBackend,
    SeededHashBackend,
)
from .db import AnnotationSet, Category, DbError, SkillDatabase
from .genpipe import GenConfig, GenerationIncomplete, build_database, query_count
from .governor import Governor, GovernorConfig
from .protocol import ProtocolError
from .providers import (
    FixtureProvider,
    OpenAiChatProvider,
    ProviderConfigError,
    ProviderError,
)
from .retrieval import Method, Query, QueryKind, RetrievalError, build_index

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _parse_backend(spec: str, db: SkillDatabase, seed: int) -> EncoderBackend:
    if spec.startswith("http:"):
        return HttpEncoderBackend(spec[len("http:"):])
    if not spec.startswith("mock:"):
        raise CliError(f"unknown backend spec {spec!r} (use mock:<name> or http:<url>)")
    parts = spec.split(":")
    name = parts[1] if len(parts) > 1 else ""
    mock_seed = int(parts[2]) if len(parts) > 2 else seed
    if name == "oracle":
        return PerfectOracleBackend(db)
    if name == "hash":
        return SeededHashBackend(seed=mock_seed)
    if name == "degraded":
        return DegradedOracleBackend(db, seed=mock_seed)
    raise CliError(f"unknown mock backend {name!r} (oracle, hash, degraded)")


def _parse_provider(spec: str):
    if spec == "fixture":
        return FixtureProvider()
    if spec == "http":
        try:
            return OpenAiChatProvider()
        except ProviderConfigError as exc:
            raise CliError(str(exc))
    raise CliError(f"unknown provider {spec!r} (fixture or http)")


def _load_db(path: str) -> SkillDatabase:
    if not Path(path).exists():
        raise CliError(f"database file not found: {path}")
    return dbmod.load(path)


def _parse_bins(spec: str) -> tuple[float, ...]:
    """lo:hi:step notation, e.g. 0.1:1.1:0.1."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CliError(f"bad bin spec {spec!r}, expected lo:hi:step")
    if step <= 0 or hi <= lo:
        raise CliError(f"bad bin spec {spec!r}: need hi > lo and step > 0")
    edges = []
    edge = lo
    while edge < hi - 1e-9:
        edges.append(round(edge, 10))
        edge += step
    edges.append(round(hi, 10))
    return tuple(edges)


def cmd_gen(args) -> int:
    provider = _parse_provider(args.provider)
    if args.n < 1:
        raise CliError(f"--n must be >= 1, got {args.n}")
    if args.category == "all":
        base, extra = divmod(args.n, 3)
        counts = {
            Category.MIMIC: base + (1 if extra > 0 else 0),
            Category.SCENE: base + (1 if extra > 1 else 0),
            Category.DIRECT: base,
        }
    else:
        counts = {Category(args.category): args.n}
    cfg = GenConfig(
        batch_size=args.batch_size,
        with_reasoning=args.reasoning,
        shuffle_seed=args.seed,
    )
    try:
        database, rejected = build_database(provider, counts, cfg)
    except GenerationIncomplete as exc:
        print(f"generation incomplete: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except ProviderError as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    dbmod.save(database, args.out)
    print(
        json.dumps(
            {
                "records": len(database),
                "rejected": len(rejected),
                "provider_calls": provider.usage.calls,
                "query_count_batched": query_count(args.n, args.batch_size),
                "query_count_baseline": query_count(args.n, 1),
                "out": str(args.out),
            }
        )
    )
    if rejected:
        for item in rejected:
            print(f"rejected: {item.instruction!r}: {item.reason}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_stats(args) -> int:
    database = _load_db(args.db)
    stats = dbmod.compute_stats(
        database,
        period_bins=_parse_bins(args.period_bins),
        vel_bins=_parse_bins(args.vel_bins),
    )
    created = reports.write_stats_reports(stats, args.out, svg=args.svg)
    print(json.dumps({"reports": [str(p) for p in created]}))
    return EXIT_OK


def _query_from_args(args) -> Query:
    given = [
        opt
        for opt, val in (
            ("--text", args.text),
            ("--image", args.image),
            ("--text-as-image", args.text_as_image),
        )
        if val
    ]
    if len(given) != 1:
        raise CliError("provide exactly one of --text, --image, --text-as-image")
    if args.text:
        return Query.text(args.text)
    if args.text_as_image:
        return Query.text_as_image(args.text_as_image)
    path = Path(args.image)
    if not path.exists():
        raise CliError(f"image file not found: {path}")
    return Query.image(path.read_bytes())


def cmd_retrieve(args) -> int:
    database = _load_db(args.db)
    backend = _parse_backend(args.backend, database, args.seed)
    index = build_index(database, backend)
    method = Method(args.method)

    def run_one(query: Query) -> dict:
        result = retrieval.retrieve(
            query, database, index, backend, k=args.k, method=method
        )
        payload = result.to_dict()
        payload["record"] = database.get(result.chosen_id).to_dict()
        return payload

    if args.repl:
        for line in sys.stdin:
            text = line.strip()
            if not text or text in ("exit", "quit"):
                break
            print(json.dumps(run_one(Query.text(text))), flush=True)
        return EXIT_OK
    print(json.dumps(run_one(_query_from_args(args))))
    return EXIT_OK


def cmd_eval(args) -> int:
    database = _load_db(args.db)
    annotations = AnnotationSet.load(args.annotations)
    backend = _parse_backend(args.backend, database, args.seed)
    methods = tuple(Method(m) for m in args.methods.split(","))
    representations = tuple(QueryKind(r) for r in args.representations.split(","))
    report = retrieval.evaluate(
        annotations, database, backend, k=args.k,
        methods=methods, representations=representations,
    )
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fp:
            reports.write_eval_csv(report, fp)
    reports.write_eval_csv(report, sys.stdout)
    return EXIT_OK


def cmd_navsim(args) -> int:
    scenario = navsim.load_scenario(args.scenario)
    governor = None
    if args.governor:
        database = _load_db(args.db)
        backend = _parse_backend(args.backend, database, args.seed)
        index = build_index(database, backend)
        governor = Governor(
            database,
            index,
            backend,
            GovernorConfig(
                inference_period_s=args.inference_period,
                k=args.k,
                method=Method(args.method),
                fallback_vel_limit=args.fallback_vel_limit,
            ),
        )
    result = navsim.simulate(scenario, governor)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fp:
            navsim.write_run_log(result, fp)
    print(
        json.dumps(
            {
                "min_clearance": result.min_clearance,
                "steps": len(result.rows),
                "governor": bool(governor),
                "final_position": [
                    round(float(v), 4) for v in result.trajectory[-1]
                ],
                "log": args.out,
            }
        )
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    database = _load_db(args.db)
    backend = _parse_backend(args.backend, database, args.seed)
    index = build_index(database, backend)
    host, _, port = args.listen.rpartition(":")
    try:
        address = (host or "127.0.0.1", int(port))
    except ValueError:
        raise CliError(f"bad --listen {args.listen!r}, expected host:port")
    srv = server.RetrievalServer(
        address, database, index, backend,
        default_k=args.k, default_method=Method(args.method),
    )

    def shutdown(signum, frame):
        # shutdown() must come from another thread than serve_forever
        import threading

        threading.Thread(target=srv.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, shutdown)
    signal.signal(signal.SIGINT, shutdown)
    bound = srv.server_address  # resolves ephemeral port requests
    print(
        json.dumps({"listening": f"{bound[0]}:{bound[1]}", "records": len(database)}),
        flush=True,
    )
    srv.serve_forever()
    srv.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillground",
        description="instruction-grounded locomotion skills: generation, retrieval, governor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a skill database via an LLM provider")
    p.add_argument("--provider", default="fixture", help="fixture or http")
    p.add_argument("--category", default="all",
                   choices=["all", "mimic", "scene", "direct"])
    p.add_argument("--n", type=int, default=300, help="total records")
    p.add_argument("--batch-size", type=int, default=25)
    p.add_argument("--reasoning", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="skilldb.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="database statistics reports")
    p.add_argument("--db", required=True)
    p.add_argument("--out", default="stats")
    p.add_argument("--period-bins", default="0.1:1.1:0.1")
    p.add_argument("--vel-bins", default="0:3:0.25")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("retrieve", help="retrieve a descriptor for a query")
    p.add_argument("--db", required=True)
    p.add_argument("--backend", default="mock:hash")
    p.add_argument("--text")
    p.add_argument("--image", help="path to a PNG query image")
    p.add_argument("--text-as-image", dest="text_as_image",
                   help="render this text and query through the image path")
    p.add_argument("--repl", action="store_true",
                   help="read text queries from stdin, one per line")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--method", default="mixed",
                   choices=[m.value for m in Method])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="retrieval accuracy against annotations")
    p.add_argument("--db", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--backend", default="mock:oracle")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--methods", default="cosine,topk,topk_itm,mixed")
    p.add_argument("--representations", default="text,text_as_image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the accuracy table CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("navsim", help="corridor simulation with/without governor")
    p.add_argument("--scenario", required=True)
    p.add_argument("--db")
    p.add_argument("--backend", default="mock:oracle")
    p.add_argument("--governor", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--inference-period", type=float, default=5.0)
    p.add_argument("--fallback-vel-limit", type=float, default=1.5)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--method", default="mixed", choices=[m.value for m in Method])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="run log CSV path")
    p.set_defaults(func=cmd_navsim)

    p = sub.add_parser("serve", help="HTTP retrieval service")
    p.add_argument("--db", required=True)
    p.add_argument("--backend", default="mock:hash")
    p.add_argument("--listen", default="127.0.0.1:8787")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--method", default="mixed", choices=[m.value for m in Method])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "navsim" and args.governor and not args.db:
        print("error: --db is required when the governor is enabled", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DbError, ProtocolError, RetrievalError, BackendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
