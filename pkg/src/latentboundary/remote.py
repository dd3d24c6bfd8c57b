"""Newline-delimited JSON over TCP: oracle wire protocol, client, and a
reference server.

Frames are single JSON objects terminated by "\\n". Payload numbers are
32-bit reals serialized as shortest round-trip decimals; the engine widens
them to 64-bit on receipt. A request is charged exactly once even if the
transport retries: the client resends with the same id and the server
deduplicates ids within a session.

Request:  {"op": "classify"|"generate"|"encode"|"embed"|"info",
           "id": int, "payload": [reals]}
Response: {"id": int, "ok": bool, "label"?: int, "confidence"?: real,
           "payload"?: [reals], "info"?: {...}, "error"?: str}
Info:     {"num_classes", "input_dim", "latent_dim", "image_dim",
           "embed_dim", "concurrent", "deterministic",
           "latent_low", "latent_high"}
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from typing import Optional, Sequence

import numpy as np

from .core import BoundsBox, Vector
from .errors import ContractViolation, OracleUnreachable, ProtocolError
from .oracles import ClassifierOracle, EmbeddingOracle, EncoderOracle, GeneratorOracle

MAX_FRAME = 16 * 1024 * 1024

OPS = ("classify", "generate", "encode", "embed", "info")


def to_wire(x: Vector) -> list[float]:
    """Round to 32-bit and emit as Python floats (shortest-decimal in JSON)."""
    return [float(v) for v in np.asarray(x, dtype=np.float32)]


def from_wire(payload: Sequence[float]) -> Vector:
    """Widen a 32-bit wire payload to the engine's 64-bit vectors."""
    return np.asarray(payload, dtype=np.float32).astype(np.float64)


class OracleClient:
    """Protocol client. Thread-safe; frames are serialized onto the stream
    and responses demultiplexed by id."""

    def __init__(self, address: tuple[str, int], timeout: float = 10.0,
                 max_frame: int = MAX_FRAME, retries: int = 2):
        self.address = address
        self.timeout = timeout
        self.max_frame = max_frame
        self.retries = retries
        self._lock = threading.RLock()
        self._next_id = 0
        self._bytes_read = 0
        self._pending: dict[int, dict] = {}
        self._outstanding: set[int] = set()
        try:
            self._sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise OracleUnreachable(f"cannot connect to {address}: {exc}") from exc
        self._rfile = self._sock.makefile("rb")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def _fresh_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def _send(self, frame: bytes) -> None:
        self._sock.sendall(frame)

    def _read_response(self) -> dict:
        offset = self._bytes_read
        line = self._rfile.readline(self.max_frame + 1)
        if not line:
            raise OracleUnreachable("server closed the connection")
        if len(line) > self.max_frame:
            raise ProtocolError("oversized frame", byte_offset=offset)
        self._bytes_read += len(line)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed frame: {exc}", byte_offset=offset) from exc
        if not isinstance(obj, dict) or "id" not in obj:
            raise ProtocolError("response frame without id", byte_offset=offset)
        return obj

    def _await(self, rid: int) -> dict:
        while True:
            if rid in self._pending:
                self._outstanding.discard(rid)
                return self._pending.pop(rid)
            obj = self._read_response()
            if obj["id"] == rid:
                self._outstanding.discard(rid)
                return obj
            if obj["id"] not in self._outstanding:
                raise ProtocolError(
                    f"response id {obj['id']} matches no outstanding request"
                )
            self._pending[obj["id"]] = obj

    def call(self, op: str, payload: Optional[Sequence[float]] = None) -> dict:
        """One request/response round trip, with idempotent resend on timeout."""
        req: dict = {"op": op, "id": None}
        if payload is not None:
            req["payload"] = list(payload)
        with self._lock:
            rid = self._fresh_id()
            req["id"] = rid
            self._outstanding.add(rid)
            frame = (json.dumps(req, separators=(",", ":")) + "\n").encode()
            last_exc: Exception | None = None
            for _ in range(self.retries + 1):
                try:
                    self._send(frame)
                    resp = self._await(rid)
                    break
                except socket.timeout as exc:
                    last_exc = exc  # resend with the same id; server dedups
            else:
                raise OracleUnreachable(f"no response after {self.retries} retries") from last_exc
        if not resp.get("ok", False):
            raise ProtocolError(f"server error for op {op!r}: {resp.get('error')}")
        return resp

    def call_many(self, op: str, payloads: Sequence[Sequence[float]]) -> list[dict]:
        """Pipeline a batch of requests; responses returned in request order."""
        with self._lock:
            rids = []
            out = bytearray()
            for payload in payloads:
                rid = self._fresh_id()
                rids.append(rid)
                self._outstanding.add(rid)
                out += (json.dumps({"op": op, "id": rid, "payload": list(payload)},
                                   separators=(",", ":")) + "\n").encode()
            self._send(bytes(out))
            resps = [self._await(rid) for rid in rids]
        for resp in resps:
            if not resp.get("ok", False):
                raise ProtocolError(f"server error for op {op!r}: {resp.get('error')}")
        return resps

    def info(self) -> dict:
        resp = self.call("info")
        info = resp.get("info")
        if not isinstance(info, dict):
            raise ProtocolError("info response carries no info object")
        return info


class RemoteClassifier(ClassifierOracle):
    def __init__(self, client: OracleClient, info: dict):
        self.client = client
        self.num_classes = int(info["num_classes"])
        self.input_dim = int(info["input_dim"])
        self.concurrent = bool(info.get("concurrent", False))

    def classify(self, x: Vector) -> tuple[int, Optional[float]]:
        resp = self.client.call("classify", to_wire(x))
        conf = resp.get("confidence")
        return int(resp["label"]), (None if conf is None else float(conf))

    def classify_batch(self, xs: Sequence[Vector]) -> list[tuple[int, Optional[float]]]:
        if not self.concurrent:
            return super().classify_batch(xs)
        resps = self.client.call_many("classify", [to_wire(x) for x in xs])
        return [
            (int(r["label"]),
             None if r.get("confidence") is None else float(r["confidence"]))
            for r in resps
        ]


class RemoteGenerator(GeneratorOracle):
    def __init__(self, client: OracleClient, info: dict):
        self.client = client
        self.latent_dim = int(info["latent_dim"])
        self.image_dim = int(info["image_dim"])
        self.latent_bounds = BoundsBox(
            float(info.get("latent_low", 0.0)), float(info.get("latent_high", 1.0))
        )
        self.concurrent = bool(info.get("concurrent", False))

    def generate(self, w: Vector) -> Vector:
        return from_wire(self.client.call("generate", to_wire(w))["payload"])


class RemoteEncoder(EncoderOracle):
    def __init__(self, client: OracleClient, info: dict):
        self.client = client
        self.concurrent = bool(info.get("concurrent", False))

    def encode(self, x: Vector) -> Vector:
        return from_wire(self.client.call("encode", to_wire(x))["payload"])


class RemoteEmbedder(EmbeddingOracle):
    def __init__(self, client: OracleClient, info: dict):
        self.client = client
        self.embed_dim = int(info.get("embed_dim", 0))
        self.name = "remote-embed"

    def embed(self, x: Vector) -> Vector:
        return from_wire(self.client.call("embed", to_wire(x))["payload"])


class RemoteOracleSet:
    """Oracle views over one protocol connection."""

    def __init__(self, client: OracleClient, info: dict, allow_nondeterministic: bool = False):
        self.client = client
        self.info = info
        self.deterministic = bool(info.get("deterministic", False))
        if not self.deterministic and not allow_nondeterministic:
            raise ContractViolation(
                "remote oracle declares itself non-deterministic; the engine requires "
                "determinism (pass allow_nondeterministic=True to override)"
            )
        self.classifier = RemoteClassifier(client, info)
        self.generator = RemoteGenerator(client, info) if info.get("latent_dim") else None
        self.encoder = RemoteEncoder(client, info)
        self.embedder = RemoteEmbedder(client, info) if info.get("embed_dim") else None

    def close(self) -> None:
        self.client.close()


def connect(address: tuple[str, int], allow_nondeterministic: bool = False,
            timeout: float = 10.0) -> RemoteOracleSet:
    """Dial the server, run the info handshake, and build oracle views."""
    client = OracleClient(address, timeout=timeout)
    return RemoteOracleSet(client, client.info(), allow_nondeterministic)


# ---------------------------------------------------------------------------
# Reference server (also the in-process mock used by tests and verify-remote)
# ---------------------------------------------------------------------------


class OracleBinding:
    """What a server exposes: any subset of classify/generate/encode/embed."""

    def __init__(
        self,
        classifier: Optional[ClassifierOracle] = None,
        generator: Optional[GeneratorOracle] = None,
        encoder: Optional[EncoderOracle] = None,
        embedder: Optional[EmbeddingOracle] = None,
        deterministic: bool = True,
        concurrent: bool = False,
    ):
        self.classifier = classifier
        self.generator = generator
        self.encoder = encoder
        self.embedder = embedder
        self.deterministic = deterministic
        self.concurrent = concurrent

    def info(self) -> dict:
        info = {
            "num_classes": self.classifier.num_classes if self.classifier else 0,
            "input_dim": self.classifier.input_dim if self.classifier else 0,
            "latent_dim": self.generator.latent_dim if self.generator else 0,
            "image_dim": self.generator.image_dim if self.generator else 0,
            "embed_dim": self.embedder.embed_dim if self.embedder else 0,
            "concurrent": self.concurrent,
            "deterministic": self.deterministic,
        }
        if self.generator is not None:
            info["latent_low"] = self.generator.latent_bounds.low
            info["latent_high"] = self.generator.latent_bounds.high
        return info

    @classmethod
    def from_suite(cls, suite) -> "OracleBinding":
        return cls(
            classifier=suite.classifier,
            generator=suite.generator,
            encoder=suite.encoder,
            deterministic=True,
            concurrent=True,
        )


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        binding: OracleBinding = self.server.binding  # type: ignore[attr-defined]
        session: dict[int, bytes] = {}  # id -> response frame, for retry dedup
        while True:
            line = self.rfile.readline(MAX_FRAME + 1)
            if not line:
                return
            try:
                req = json.loads(line)
                rid = req["id"]
                op = req["op"]
            except (json.JSONDecodeError, KeyError, TypeError):
                self.wfile.write(b'{"id":-1,"ok":false,"error":"malformed request"}\n')
                continue
            if rid in session:
                self.wfile.write(session[rid])  # duplicate id: replay, don't recompute
                continue
            resp = self._dispatch(binding, op, req)
            resp["id"] = rid
            frame = (json.dumps(resp, separators=(",", ":")) + "\n").encode()
            session[rid] = frame
            self.wfile.write(frame)

    @staticmethod
    def _dispatch(binding: OracleBinding, op: str, req: dict) -> dict:
        try:
            if op == "info":
                return {"ok": True, "info": binding.info()}
            payload = req.get("payload")
            if not isinstance(payload, list):
                return {"ok": False, "error": f"op {op!r} requires a payload array"}
            x = from_wire(payload)
            if op == "classify":
                if binding.classifier is None:
                    return {"ok": False, "error": "no classifier bound"}
                if x.size != binding.classifier.input_dim:
                    return {"ok": False,
                            "error": f"expected dim {binding.classifier.input_dim}, got {x.size}"}
                label, conf = binding.classifier.classify(x)
                return {"ok": True, "label": int(label),
                        "confidence": None if conf is None else float(conf)}
            if op == "generate":
                if binding.generator is None:
                    return {"ok": False, "error": "no generator bound"}
                if x.size != binding.generator.latent_dim:
                    return {"ok": False,
                            "error": f"expected dim {binding.generator.latent_dim}, got {x.size}"}
                return {"ok": True, "payload": to_wire(binding.generator.generate(x))}
            if op == "encode":
                if binding.encoder is None:
                    return {"ok": False, "error": "no encoder bound"}
                return {"ok": True, "payload": to_wire(binding.encoder.encode(x))}
            if op == "embed":
                if binding.embedder is None:
                    return {"ok": False, "error": "no embedder bound"}
                return {"ok": True, "payload": to_wire(binding.embedder.embed(x))}
            return {"ok": False, "error": f"unknown op {op!r}"}
        except Exception as exc:  # shape errors etc. answer in-band, never drop
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


class OracleServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, binding: OracleBinding, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.binding = binding

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def verify_remote(
    oracles: RemoteOracleSet,
    local_suite=None,
    probes: int = 100,
    seed: int = 0,
) -> dict:
    """Handshake + determinism probe (+ optional equivalence vs a local suite).

    Repeats one classify payload and requires identical labels; with a local
    suite, compares labels on random probe vectors (both sides see the same
    32-bit-rounded probe).
    """
    from .core import make_rng

    rng = make_rng(seed)
    info = oracles.info
    dim = oracles.classifier.input_dim
    probe = from_wire(to_wire(rng.uniform(-1.0, 2.0, size=dim)))
    labels = {oracles.classifier.classify(probe)[0] for _ in range(100)}
    result = {
        "info": info,
        "deterministic_probe_ok": len(labels) == 1,
        "equivalence_checked": False,
        "equivalence_ok": None,
        "mismatches": 0,
    }
    if local_suite is not None:
        mismatches = 0
        for _ in range(probes):
            x = from_wire(to_wire(rng.uniform(-1.0, 2.0, size=dim)))
            if oracles.classifier.classify(x)[0] != local_suite.classifier.classify(x)[0]:
                mismatches += 1
        result["equivalence_checked"] = True
        result["mismatches"] = mismatches
        result["equivalence_ok"] = mismatches == 0
    return result
