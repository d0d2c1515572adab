"""Launcher: load the model, then serve until SIGTERM/SIGINT."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading

from .encoders import ModelNotLoadedError, load_encoder
from .server import DEFAULT_MAX_PAYLOAD, SidecarServer


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlm-sidecar",
        description="vision-language encoder + ITM head over the wire protocol",
    )
    parser.add_argument(
        "--model",
        default="hashed",
        help="hashed[:dim] (offline, deterministic) or blip2[:checkpoint]",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--listen", default="127.0.0.1:8790")
    parser.add_argument("--max-payload-bytes", type=int, default=DEFAULT_MAX_PAYLOAD)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    host, _, port = args.listen.rpartition(":")
    try:
        address = (host or "127.0.0.1", int(port))
    except ValueError:
        print(f"error: bad --listen {args.listen!r}", file=sys.stderr)
        return 2

    try:
        encoder = load_encoder(args.model, device=args.device)
    except (ModelNotLoadedError, ValueError, OSError) as exc:
        print(f"error: model load failed: {exc}", file=sys.stderr)
        return 2

    server = SidecarServer(address, encoder, max_payload_bytes=args.max_payload_bytes)

    def shutdown(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, shutdown)
    signal.signal(signal.SIGINT, shutdown)
    bound = server.server_address
    print(
        json.dumps(
            {
                "listening": f"{bound[0]}:{bound[1]}",
                "model": encoder.model_id,
                "dim": encoder.dim,
            }
        ),
        flush=True,
    )
    server.serve_forever()
    server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
