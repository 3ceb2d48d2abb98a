"""HTTP/JSON service for incident review and analyst evidence feedback.

Endpoints (payload schemas documented in api.md):
  GET  /health
  GET  /incidents
  GET  /incidents/{id}
  POST /incidents/{id}/evidence   {"tactic": ..., "state": ...} or
                                  {"alert": ..., "state": ...}
  GET  /ui/...                    static bundle, when a ui dir is configured

Evidence mutations re-infer the incident's factor graph atomically under a
per-incident lock and persist to a sidecar file so restarts keep analyst
state.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .factorgraph import (
    EvidenceError,
    build_fg,
    infer_exact,
)
from .incidents import Incident, incident_summary, parse_incident
from .model import Tactic, default_transition_matrix

log = logging.getLogger(__name__)

VALID_STATES = ("Active", "Inactive", "Clear")


class ServiceError(RuntimeError):
    pass


@dataclass
class IncidentSession:
    incident: Incident
    tactic_evidence: dict[Tactic, bool] = field(default_factory=dict)
    inactive_alerts: set[str] = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def rescore(self, false_indication: float) -> None:
        fg = build_fg(self.incident.nodes, default_transition_matrix(),
                      false_indication)
        for alert_id in sorted(self.inactive_alerts):
            fg = fg.without_factor(f"alert:{alert_id}")
        evidence = {t: v for t, v in self.tactic_evidence.items()
                    if t in fg.variables}
        self.incident.scores = infer_exact(fg, evidence)
        self.incident.evidence = dict(self.tactic_evidence)


class SessionStore:
    """Incidents by id plus their current evidence and latest scores."""

    def __init__(self, data_dir: Path, false_indication: float = 0.2):
        self.data_dir = data_dir
        self.false_indication = false_indication
        self.sessions: dict[str, IncidentSession] = {}
        self._store_lock = threading.Lock()
        self._load()

    # -- persistence --

    @property
    def _sidecar(self) -> Path:
        return self.data_dir / "evidence.json"

    def _load(self) -> None:
        incidents_file = self.data_dir / "05_incidents" / "incidents.json"
        if not incidents_file.exists():
            return
        docs = json.loads(incidents_file.read_text(encoding="utf-8"))
        for doc in docs:
            inc = parse_incident(doc)
            self.sessions[inc.id] = IncidentSession(incident=inc)
        if self._sidecar.exists():
            saved = json.loads(self._sidecar.read_text(encoding="utf-8"))
            for inc_id, ev in saved.items():
                sess = self.sessions.get(inc_id)
                if sess is None:
                    continue
                sess.tactic_evidence = {
                    Tactic(t): state == "Active"
                    for t, state in ev.get("tactics", {}).items()
                }
                sess.inactive_alerts = set(ev.get("inactive_alerts", []))
                sess.rescore(self.false_indication)

    def _persist(self) -> None:
        payload = {
            inc_id: {
                "tactics": {
                    t.value: "Active" if flag else "Inactive"
                    for t, flag in sorted(sess.tactic_evidence.items())
                },
                "inactive_alerts": sorted(sess.inactive_alerts),
            }
            for inc_id, sess in sorted(self.sessions.items())
            if sess.tactic_evidence or sess.inactive_alerts
        }
        with self._store_lock:
            tmp = self._sidecar.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
            tmp.replace(self._sidecar)

    # -- queries --

    @property
    def loaded(self) -> bool:
        return bool(self.sessions)

    def ordered(self) -> list[IncidentSession]:
        return sorted(
            self.sessions.values(),
            key=lambda s: (
                -s.incident.top_score(),
                -len(s.incident.nodes),
                s.incident.id,
            ),
        )

    def summaries(self) -> list[dict]:
        return [
            {
                "id": s.incident.id,
                "tactic_count": len(s.incident.tactics),
                "top_score": s.incident.top_score(),
                "node_count": len(s.incident.nodes),
            }
            for s in self.ordered()
        ]

    def document(self, inc_id: str) -> dict:
        sess = self.sessions[inc_id]
        with sess.lock:
            doc = incident_summary(sess.incident)
            doc["inactive_alerts"] = sorted(sess.inactive_alerts)
            return doc

    # -- mutations --

    def apply_tactic_evidence(self, inc_id: str, tactic_name: str, state: str) -> dict:
        sess = self.sessions[inc_id]
        try:
            tactic = Tactic(tactic_name)
        except ValueError:
            raise ServiceError(f"unknown tactic {tactic_name!r}")
        if tactic not in sess.incident.tactics:
            raise ServiceError(f"tactic {tactic_name} not present in {inc_id}")
        with sess.lock:
            if state == "Clear":
                sess.tactic_evidence.pop(tactic, None)
            else:
                sess.tactic_evidence[tactic] = state == "Active"
            sess.rescore(self.false_indication)
            self._persist()
            return incident_summary(sess.incident)

    def apply_alert_evidence(self, inc_id: str, alert_id: str, state: str) -> dict:
        sess = self.sessions[inc_id]
        if alert_id not in {n.id for n in sess.incident.nodes}:
            raise ServiceError(f"alert {alert_id!r} not part of {inc_id}")
        if state == "Active":
            raise ServiceError(
                "alert-level evidence supports Inactive (factor removal) and Clear"
            )
        with sess.lock:
            if state == "Clear":
                sess.inactive_alerts.discard(alert_id)
            else:
                remaining = {n.id for n in sess.incident.nodes}
                remaining -= sess.inactive_alerts | {alert_id}
                if not remaining:
                    raise ServiceError("cannot mark every alert inactive")
                sess.inactive_alerts.add(alert_id)
            sess.rescore(self.false_indication)
            self._persist()
            return incident_summary(sess.incident)


def make_handler(store: SessionStore, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        server_version = "incidentgraph"

        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.client_address[0], *args)

        def _send(self, code: int, payload) -> None:
            body = json.dumps(payload, sort_keys=True).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _error(self, code: int, msg: str) -> None:
            self._send(code, {"error": msg})

        def do_GET(self):  # noqa: N802  (stdlib handler naming)
            try:
                self._route_get()
            except Exception as e:  # pragma: no cover - defensive
                log.exception("GET %s failed", self.path)
                self._error(500, str(e))

        def _route_get(self):
            path = self.path.split("?", 1)[0].rstrip("/") or "/"
            if path == "/health":
                self._send(200, {"status": "ok", "incidents": len(store.sessions)})
                return
            if path == "/incidents":
                if not store.loaded:
                    self._error(409, "no pipeline output loaded")
                    return
                self._send(200, store.summaries())
                return
            if path.startswith("/incidents/"):
                inc_id = path[len("/incidents/"):]
                if inc_id not in store.sessions:
                    self._error(404, f"unknown incident {inc_id!r}")
                    return
                self._send(200, store.document(inc_id))
                return
            if path == "/" and ui_dir is not None:
                self._redirect("/ui/")
                return
            if path.startswith("/ui") and ui_dir is not None:
                self._serve_static(path)
                return
            self._error(404, f"no route for {path!r}")

        def _redirect(self, target: str):
            self.send_response(302)
            self.send_header("Location", target)
            self.end_headers()

        def _serve_static(self, path: str):
            rel = path[len("/ui"):].lstrip("/") or "index.html"
            file_path = (ui_dir / rel).resolve()
            if not str(file_path).startswith(str(ui_dir.resolve())) or not file_path.is_file():
                self._error(404, "not found")
                return
            body = file_path.read_bytes()
            ctype = mimetypes.guess_type(str(file_path))[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):  # noqa: N802
            path = self.path.rstrip("/")
            if not (path.startswith("/incidents/") and path.endswith("/evidence")):
                self._error(404, f"no route for {path!r}")
                return
            inc_id = path[len("/incidents/"):-len("/evidence")]
            if inc_id not in store.sessions:
                self._error(404, f"unknown incident {inc_id!r}")
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                self._error(400, "invalid JSON body")
                return
            state = body.get("state")
            if state not in VALID_STATES:
                self._error(400, f"state must be one of {list(VALID_STATES)}")
                return
            try:
                if "tactic" in body:
                    doc = store.apply_tactic_evidence(inc_id, body["tactic"], state)
                elif "alert" in body:
                    doc = store.apply_alert_evidence(inc_id, body["alert"], state)
                else:
                    self._error(400, "body needs a tactic or alert field")
                    return
            except (ServiceError, EvidenceError) as e:
                self._error(400, str(e))
                return
            self._send(
                200,
                {
                    "id": inc_id,
                    "tactic_scores": doc["tactic_scores"],
                    "evidence": doc["evidence"],
                    "inactive_alerts": sorted(
                        store.sessions[inc_id].inactive_alerts
                    ),
                },
            )

    return Handler


def serve(
    data_dir: Path,
    host: str = "127.0.0.1",
    port: int = 8787,
    ui_dir: Path | None = None,
) -> ThreadingHTTPServer:
    """Build the server (caller runs serve_forever; tests drive it directly)."""
    store = SessionStore(data_dir)
    handler = make_handler(store, ui_dir)
    httpd = ThreadingHTTPServer((host, port), handler)
    httpd.store = store  # type: ignore[attr-defined]
    return httpd
