"""CLI launcher: ``modelserver --config server.json --host 0.0.0.0 --port 8080``."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServerConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="modelserver")
    parser.add_argument("--config", help="JSON config mapping endpoints to model identifiers")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)
    config = ServerConfig.from_file(args.config) if args.config else ServerConfig()
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
