"""Server configuration: endpoint-to-model mapping plus serving limits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

DEFAULT_ENDPOINTS = {
    "qg": "builtin:qg-template",
    "qa": "builtin:qa-overlap",
    "nli": "builtin:nli-rules",
    "embed": "builtin:embed-hash",
    "spans": "builtin:spans-regex",
    "generate": "builtin:seq2seq-stub",
}


@dataclass
class ServerConfig:
    endpoints: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ENDPOINTS))
    device: str = "cpu"
    max_batch: int = 128
    max_inflight: int = 8
    beam_size: int = 1  # greedy by default; 10 mirrors beam-search serving

    def __post_init__(self):
        missing = set(DEFAULT_ENDPOINTS) - set(self.endpoints)
        if missing:
            raise ValueError(f"config missing endpoints: {sorted(missing)}")
        if self.max_batch < 1 or self.max_inflight < 1 or self.beam_size < 1:
            raise ValueError("max_batch, max_inflight, and beam_size must be >= 1")

    @classmethod
    def from_file(cls, path) -> "ServerConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        endpoints = dict(DEFAULT_ENDPOINTS)
        endpoints.update(obj.get("endpoints", {}))
        return cls(
            endpoints=endpoints,
            device=obj.get("device", "cpu"),
            max_batch=int(obj.get("max_batch", 128)),
            max_inflight=int(obj.get("max_inflight", 8)),
            beam_size=int(obj.get("beam_size", 1)),
        )
