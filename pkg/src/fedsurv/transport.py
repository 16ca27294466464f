"""Networked execution of the three-phase protocol.

One coordinator and K clients exchange length-prefixed JSON envelopes over
TCP: schemas up, the merged federated schema down, serialized forests up,
and per-site compatible trees (plus surviving local-tree indices) down.
The coordinator owns every random draw, so a networked round reproduces
the in-process :func:`fedsurv.federation.federate` call byte for byte.
"""
from __future__ import annotations

import json
import socket
import struct
import threading
import time as _time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from fedsurv import federation, schema as schema_mod
from fedsurv.forest import ForestParams, fit_forest, forest_from_doc, forest_risk, forest_to_doc
from fedsurv.survival import concordance_index, n_comparable_pairs
from fedsurv.tree import canonical_json, tree_from_doc, tree_to_doc

PROTOCOL_VERSION = 1
MSG_TYPES = {"hello", "schema_upload", "federated_schema", "model_upload",
             "model_download", "round_complete", "error"}
DEFAULT_MAX_FRAME = 256 * 1024 * 1024
DEFAULT_TIMEOUT = 120.0


class TransportError(RuntimeError):
    pass


# --- frame codec ------------------------------------------------------------

def encode_frame(envelope: dict, max_frame: int = DEFAULT_MAX_FRAME) -> bytes:
    """4-byte big-endian length, then UTF-8 JSON."""
    body = json.dumps(envelope, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > max_frame:
        raise TransportError(f"frame of {len(body)} bytes exceeds limit {max_frame}")
    return struct.pack("!I", len(body)) + body


def decode_frames(data: bytes, max_frame: int = DEFAULT_MAX_FRAME) -> list:
    """Decode a byte string of zero or more concatenated frames."""
    out = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise TransportError("short frame")
        (n,) = struct.unpack("!I", data[offset:offset + 4])
        if n > max_frame:
            raise TransportError(f"frame of {n} bytes exceeds limit {max_frame}")
        if offset + 4 + n > len(data):
            raise TransportError("short frame")
        out.append(json.loads(data[offset + 4:offset + 4 + n].decode("utf-8")))
        offset += 4 + n
    return out


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def send_envelope(sock: socket.socket, msg_type: str, client_id: str, payload: dict,
                  max_frame: int = DEFAULT_MAX_FRAME) -> None:
    sock.sendall(encode_frame({
        "protocol_version": PROTOCOL_VERSION,
        "msg_type": msg_type,
        "client_id": client_id,
        "payload": payload,
    }, max_frame))


def recv_envelope(sock: socket.socket, max_frame: int = DEFAULT_MAX_FRAME) -> Optional[dict]:
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (n,) = struct.unpack("!I", header)
    if n > max_frame:
        raise TransportError(f"frame of {n} bytes exceeds limit {max_frame}")
    body = _recv_exact(sock, n)
    if body is None:
        raise TransportError("short frame")
    try:
        envelope = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TransportError(f"malformed frame: {exc}") from exc
    return envelope


# --- coordinator ------------------------------------------------------------

@dataclass
class RoundState:
    expected_clients: set
    received_schemas: dict = field(default_factory=dict)
    received_models: dict = field(default_factory=dict)
    phase: str = "awaiting_schemas"  # awaiting_schemas | awaiting_models | done
    aborted: Optional[str] = None


class Coordinator:
    """Serves exactly one federation round to a fixed client roster."""

    def __init__(self, roster, listen=("127.0.0.1", 0), seed=None,
                 timeout: float = DEFAULT_TIMEOUT, max_frame: int = DEFAULT_MAX_FRAME):
        if not roster:
            raise ValueError("roster must be non-empty")
        self.roster = list(roster)
        self.seed = seed
        self.timeout = timeout
        self.max_frame = max_frame
        self.state = RoundState(expected_clients=set(self.roster))
        self._lock = threading.Condition()
        self._federated_schema = None
        self._plans = None
        self._connected: dict = {}
        self.result_log: dict = {}
        self._server = socket.create_server(listen)
        self.address = self._server.getsockname()

    def _abort(self, reason: str) -> None:
        with self._lock:
            if self.state.aborted is None:
                self.state.aborted = reason
            self._lock.notify_all()
        for sock in list(self._connected.values()):
            try:
                send_envelope(sock, "error", "", {"reason": reason}, self.max_frame)
            except OSError:
                pass

    def _barrier(self, have) -> bool:
        """Wait until every roster member reported or the round aborted."""
        with self._lock:
            ok = self._lock.wait_for(
                lambda: self.state.aborted is not None or set(have()) == set(self.roster),
                timeout=self.timeout)
        if not ok:
            self._abort("timeout waiting for clients")
            return False
        return self.state.aborted is None

    def _compute_federation(self) -> None:
        models = {}
        for cid, payload in self.state.received_models.items():
            forest = forest_from_doc(payload["forest"])
            models[cid] = federation.LocalModel(
                forest=forest, site_id=cid,
                site_features=frozenset(payload["site_features"]),
                train_size=int(payload["train_size"]),
                update_method=payload.get("update_method", "all"),
                update_weighting=payload.get("update_weighting", "equal"))
        ordered = [models[cid] for cid in self.roster]
        pool = federation.pool_models(ordered)
        rngs = federation.site_rng_streams(ordered, self.seed)
        plans = {}
        for model in ordered:
            received = federation.compatible_trees(pool, model.site_id)
            plan = federation.plan_integration(model, received, rngs[model.site_id])
            plans[model.site_id] = {
                "local_indices": list(plan.kept_local_indices),
                "trees": [tree_to_doc(received[i]) for i in plan.kept_received_indices],
            }
            self.result_log[model.site_id] = {
                "n_local": len(model.forest.trees),
                "n_compatible": len(received),
                "active_set_size": len(plan.kept_local_indices) + len(plan.kept_received_indices),
            }
        self._plans = plans

    def _handle_client(self, sock: socket.socket) -> None:
        client_id = None
        try:
            sock.settimeout(self.timeout)
            envelope = recv_envelope(sock, self.max_frame)
            if envelope is None:
                return
            if envelope.get("protocol_version") != PROTOCOL_VERSION:
                send_envelope(sock, "error", "", {"reason": "unsupported protocol version"})
                return
            if envelope.get("msg_type") != "hello":
                send_envelope(sock, "error", "", {"reason": "out-of-phase message"})
                return
            client_id = envelope.get("client_id")
            with self._lock:
                if client_id not in self.state.expected_clients:
                    reason = ("duplicate client_id" if client_id in self._connected
                              else "unknown client_id")
                    send_envelope(sock, "error", "", {"reason": reason})
                    return
                if client_id in self._connected:
                    send_envelope(sock, "error", "", {"reason": "duplicate client_id"})
                    return
                self._connected[client_id] = sock
            send_envelope(sock, "hello", client_id, {"roster_size": len(self.roster)})

            # phase 1: schema
            envelope = recv_envelope(sock, self.max_frame)
            if envelope is None:
                raise TransportError("connection lost")
            if envelope["msg_type"] != "schema_upload":
                send_envelope(sock, "error", client_id, {"reason": "out-of-phase message"})
                self._abort(f"out-of-phase message from {client_id}")
                return
            with self._lock:
                self.state.received_schemas[client_id] = schema_mod.schema_from_doc(
                    envelope["payload"])
                self._lock.notify_all()
            if not self._barrier(lambda: self.state.received_schemas):
                return
            with self._lock:
                if self._federated_schema is None:
                    self._federated_schema = schema_mod.merge_schemas(
                        self.state.received_schemas)
                    self.state.phase = "awaiting_models"
            send_envelope(sock, "federated_schema", client_id,
                          schema_mod.federated_schema_to_doc(self._federated_schema),
                          self.max_frame)

            # phase 2/3: models up, compatible trees down
            envelope = recv_envelope(sock, self.max_frame)
            if envelope is None:
                raise TransportError("connection lost")
            if envelope["msg_type"] != "model_upload":
                send_envelope(sock, "error", client_id, {"reason": "out-of-phase message"})
                self._abort(f"out-of-phase message from {client_id}")
                return
            with self._lock:
                self.state.received_models[client_id] = envelope["payload"]
                self._lock.notify_all()
            if not self._barrier(lambda: self.state.received_models):
                return
            with self._lock:
                if self._plans is None:
                    self._compute_federation()
                    self.state.phase = "done"
                    self._lock.notify_all()
            send_envelope(sock, "model_download", client_id,
                          self._plans[client_id], self.max_frame)
            send_envelope(sock, "round_complete", client_id, {})
        except (TransportError, OSError) as exc:
            self._abort(f"client {client_id or '?'} failed: {exc}")
        finally:
            try:
                sock.close()
            except OSError:
                pass
            with self._lock:
                self._connected.pop(client_id, None)

    def run(self) -> dict:
        """Accept the roster, run one round, and return the per-site log."""
        threads = []
        self._server.settimeout(0.2)
        deadline = _time.monotonic() + self.timeout
        try:
            while True:
                with self._lock:
                    if self.state.phase == "done" or self.state.aborted is not None:
                        break
                if _time.monotonic() > deadline and len(self._connected) < len(self.roster):
                    self._abort("timeout waiting for clients")
                    break
                try:
                    sock, _ = self._server.accept()
                except socket.timeout:
                    continue
                t = threading.Thread(target=self._handle_client, args=(sock,), daemon=True)
                t.start()
                threads.append(t)
            for t in threads:
                t.join(timeout=self.timeout)
        finally:
            self._server.close()
        if self.state.aborted is not None:
            raise TransportError(f"round aborted: {self.state.aborted}")
        return self.result_log


def run_coordinator(listen, roster, seed=None, timeout: float = DEFAULT_TIMEOUT) -> dict:
    return Coordinator(roster, listen=listen, seed=seed, timeout=timeout).run()


# --- client -----------------------------------------------------------------

def _connect_with_retries(address, timeout: float, retries: int = 3) -> socket.socket:
    delay = 0.25
    last = None
    for _ in range(retries):
        try:
            return socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            last = exc
            _time.sleep(delay)
            delay *= 2
    raise TransportError(f"could not connect to coordinator: {last}")


@dataclass
class ClientResult:
    client_id: str
    c_index: Optional[float]
    n_test: int
    n_comparable_pairs: int
    active_set: list
    audit_log: list  # (direction, envelope) pairs for privacy review

    def active_set_bytes(self) -> bytes:
        return canonical_json([tree_to_doc(t) for t in self.active_set])


def run_client(address, client_id: str, table: pd.DataFrame, outcomes,
               params: Optional[ForestParams] = None, seed=None,
               update_method: str = "all", update_weighting: str = "equal",
               test_fraction: float = 0.3, timeout: float = DEFAULT_TIMEOUT,
               max_frame: int = DEFAULT_MAX_FRAME) -> ClientResult:
    """One client's side of a round.

    Uploads the local schema, aligns to the federated schema, fits a local
    forest on a seeded train split, uploads the serialized forest, applies
    the coordinator's integration plan, and evaluates on the held-out rows.
    Only schema and tree documents ever leave the process.
    """
    params = params or ForestParams()
    audit: list = []

    def send(sock, msg_type, payload):
        audit.append(("up", {"msg_type": msg_type, "payload": payload}))
        send_envelope(sock, msg_type, client_id, payload, max_frame)

    def recv(sock):
        envelope = recv_envelope(sock, max_frame)
        if envelope is None:
            raise TransportError("round aborted: connection lost")
        audit.append(("down", envelope))
        if envelope["msg_type"] == "error":
            raise TransportError(f"round aborted: {envelope['payload'].get('reason')}")
        if envelope.get("protocol_version") != PROTOCOL_VERSION:
            raise TransportError("unsupported protocol version")
        return envelope

    local_schema = schema_mod.make_schema(list(table.columns))
    sock = _connect_with_retries(address, timeout)
    try:
        sock.settimeout(timeout)
        send(sock, "hello", {})
        recv(sock)  # hello ack
        send(sock, "schema_upload", schema_mod.schema_to_doc(local_schema))
        envelope = recv(sock)
        if envelope["msg_type"] != "federated_schema":
            raise TransportError(f"unexpected message: {envelope['msg_type']}")
        fed_schema = schema_mod.federated_schema_from_doc(envelope["payload"])
        aligned = schema_mod.align_table(table, fed_schema, client_id)
        features = schema_mod.available_features(aligned)

        ss_split, ss_fit = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(ss_split)
        n = len(aligned)
        perm = rng.permutation(n)
        n_test = max(1, int(test_fraction * n))
        test_idx = np.sort(perm[:n_test])
        train_idx = np.sort(perm[n_test:])
        times = np.asarray(outcomes[0], dtype=np.float64)
        events = np.asarray(outcomes[1], dtype=bool)
        forest = fit_forest(aligned.iloc[train_idx],
                            (times[train_idx], events[train_idx]),
                            params, available_features=features, seed=ss_fit,
                            origin_site=client_id)
        send(sock, "model_upload", {
            "forest": forest_to_doc(forest),
            "site_features": sorted(features),
            "train_size": int(train_idx.size),
            "update_method": update_method,
            "update_weighting": update_weighting,
        })
        envelope = recv(sock)
        if envelope["msg_type"] != "model_download":
            raise TransportError(f"unexpected message: {envelope['msg_type']}")
        plan = envelope["payload"]
        active = [forest.trees[i] for i in plan["local_indices"]]
        active += [tree_from_doc(doc) for doc in plan["trees"]]
        envelope = recv(sock)
        if envelope["msg_type"] != "round_complete":
            raise TransportError(f"unexpected message: {envelope['msg_type']}")
    finally:
        sock.close()

    test_outcomes = (times[test_idx], events[test_idx])
    pairs = n_comparable_pairs(test_outcomes)
    ci = None
    if pairs:
        risks = forest_risk(active, aligned.iloc[test_idx])
        ci = concordance_index(risks, test_outcomes)
    return ClientResult(client_id=client_id, c_index=ci, n_test=int(test_idx.size),
                        n_comparable_pairs=pairs, active_set=active, audit_log=audit)
