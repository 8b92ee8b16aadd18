"""Line-oriented query service over a local stream socket.

One JSON object per line in, one per line out: {"ok": true, "result": ...}
or {"ok": false, "error": "..."}.  Serving queries through the store is
what lets the curation side observe usage: every answered query bumps the
access counters of the samples it touched.
"""

from __future__ import annotations

import json
import math
import os
import socketserver
import threading

from . import container, curation, index
from .record import SummaryRecord


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _sample_dict(s, coarse: bool | None = None) -> dict:
    d = {
        "sid": s.sid,
        "t_start": s.t_start,
        "t_end": s.t_end,
        "n": s.n,
        "weight": s.weight,
        "mean": s.mean.tolist(),
        "variance": None if s.variance is None else s.variance.tolist(),
        "min": None if s.min_v is None else s.min_v.tolist(),
        "max": None if s.max_v is None else s.max_v.tolist(),
    }
    if coarse is not None:
        d["coarse"] = coarse
    return d


class QueryService:
    """Wraps one record; thread-safe via a single writer lock."""

    def __init__(self, rec: SummaryRecord):
        self.rec = rec
        self.lock = threading.Lock()

    def handle_line(self, line: bytes | str) -> dict:
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "inspect":
                return self._inspect()
            if op == "interval":
                return self._interval(int(req["t0"]), int(req["t1"]))
            if op == "member":
                return self._member(req["value"])
            if op == "compare":
                return self._compare(req["store"])
            return {"ok": False, "error": f"unknown op {op!r}"}
        except Exception as exc:  # malformed requests must not kill the service
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}

    def _inspect(self) -> dict:
        with self.lock:
            return {"ok": True, "result": container.inspect_summary(self.rec)}

    def _interval(self, t0: int, t1: int) -> dict:
        with self.lock:
            parts = self.rec.query_interval(t0, t1)
            curation.record_access(self.rec.access_log, [p.sample.sid for p in parts])
            return {
                "ok": True,
                "result": [_sample_dict(p.sample, p.coarse) for p in parts],
            }

    def _member(self, value) -> dict:
        with self.lock:
            res = self.rec.membership(value)
            curation.record_access(self.rec.access_log, [s.sid for s, _ in res.candidates])
            return {
                "ok": True,
                "result": {
                    "absent_certain": res.absent_certain,
                    "nodes_visited": res.nodes_visited,
                    "candidates": [
                        {"sample": _sample_dict(s), "likelihood": like}
                        for s, like in res.candidates
                    ],
                    "note": res.note,
                },
            }

    def _compare(self, other_path: str) -> dict:
        from . import compare as cmp

        other = container.load(other_path)
        with self.lock:
            verdict = cmp.subset_verdict(self.rec.aggregate(), other.aggregate())
        return {
            "ok": True,
            "result": {
                "verdict": verdict.verdict,
                "d_ab": _jsonable(verdict.d_ab),
                "d_ba": _jsonable(verdict.d_ba),
                "note": verdict.note,
            },
        }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            resp = self.server.service.handle_line(line)
            self.wfile.write(json.dumps(resp, sort_keys=True).encode("utf-8") + b"\n")
            self.wfile.flush()


class SocketServer(socketserver.ThreadingMixIn, socketserver.UnixStreamServer):
    daemon_threads = True
    allow_reuse_address = True


def make_server(rec: SummaryRecord, socket_path: str) -> SocketServer:
    if os.path.exists(socket_path):
        os.unlink(socket_path)
    server = SocketServer(socket_path, _Handler)
    server.service = QueryService(rec)
    return server


def serve(store_path: str, socket_path: str) -> None:
    """Load a store and answer queries until interrupted; saves on exit."""
    rec = container.load(store_path)
    server = make_server(rec, socket_path)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        container.save(rec, store_path)  # persist collected access counters
        if os.path.exists(socket_path):
            os.unlink(socket_path)
