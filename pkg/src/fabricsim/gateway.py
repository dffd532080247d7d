"""HTTP/JSON gateway holding one resident composition over one scenario.

Reads are served from immutable snapshots; mutations are funneled through a
single lock and guarded by optimistic versioning: every compose/decompose
must carry the version it was computed against, and a mismatch returns
VERSION_CONFLICT without touching state.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import perf, scenario as scenario_io
from .composition import FabricComposer, PlanPolicy, PlanRequest
from .enumeration import enumerate_host
from .errors import FabricError
from .scenario import ScenarioFile

STATUS_BY_CODE = {
    "VERSION_CONFLICT": 409,
    "NOT_IN_POOL": 409,
    "NOT_ASSIGNED": 409,
    "NOT_COMPOSED": 409,
    "DIFFERENT_HOSTS": 409,
    "DRIVER_LIMIT": 422,
    "FRAMEWORK_LIMIT": 422,
    "ADDRESS_EXHAUSTION": 422,
    "INSUFFICIENT_POOL": 422,
    "BUS_EXHAUSTION": 422,
    "UNKNOWN_HOST": 404,
    "UNKNOWN_ENDPOINT": 404,
    "UNKNOWN_NODE": 404,
    "NO_MODEL": 404,
    "NOT_FOUND": 404,
}
DEFAULT_ERROR_STATUS = 400

MAX_BODY_BYTES = 4 * 1024 * 1024


class ApiError(FabricError):
    """Gateway-level error with extra structured detail."""

    def __init__(self, code: str, message: str, detail: dict | None = None):
        super().__init__(message, code)
        self.detail = detail or {}

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self), **self.detail}


class Gateway:
    """Scenario, composer, resident state and the per-session scaling fit."""

    def __init__(self, scenario: ScenarioFile, state_file: str | None = None):
        self.scenario = scenario
        self.topo = scenario.effective_topology()
        self.composer = FabricComposer(self.topo, scenario.policy(),
                                       scenario.profile_set())
        self.state_file = state_file
        self._state = self._initial_state()
        self._model = None
        self._lock = threading.Lock()

    def _initial_state(self):
        if self.state_file:
            try:
                with open(self.state_file, "rb") as fh:
                    return scenario_io.parse_composition(fh.read(), self.topo)
            except FileNotFoundError:
                pass
        return self.composer.initial_state()

    def snapshot(self):
        return self._state

    def mutate(self, action: str, host: str, endpoints,
               expected_version: int):
        apply = (self.composer.compose if action == "compose"
                 else self.composer.decompose)
        with self._lock:
            if expected_version != self._state.version:
                raise ApiError(
                    "VERSION_CONFLICT",
                    f"expected version {expected_version}, state is at "
                    f"{self._state.version}",
                    {"expected_version": expected_version,
                     "actual_version": self._state.version})
            new_state = apply(self._state, host, endpoints)
            self._state = new_state
            self._flush()
            return new_state

    def _flush(self):
        if self.state_file:
            data = scenario_io.serialize_composition(self._state, self.topo)
            with open(self.state_file, "wb") as fh:
                fh.write(data)

    def set_model(self, model):
        self._model = model

    def model(self):
        if self._model is None:
            raise ApiError("NO_MODEL",
                           "no scaling model fitted in this session")
        return self._model


def _int_field(body: dict, key: str) -> int:
    value = body.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ApiError("BAD_REQUEST", f"{key} must be an integer")
    return value


def _query_param(query: dict, key: str, default=None, required=False):
    values = query.get(key)
    if not values:
        if required:
            raise ApiError("BAD_REQUEST", f"missing query parameter {key}")
        return default
    return values[0]


class GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "fabricsim-gateway"

    # set by make_server
    gateway: Gateway = None
    allow_origin: str | None = None

    def log_message(self, format, *args):  # tests hammer the server
        pass

    # -- plumbing ---------------------------------------------------------

    def _send_json(self, status: int, doc: dict):
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        if self.allow_origin:
            self.send_header("Access-Control-Allow-Origin", self.allow_origin)
        self.end_headers()
        self.wfile.write(body)

    def _send_error_doc(self, exc: FabricError):
        status = STATUS_BY_CODE.get(exc.code, DEFAULT_ERROR_STATUS)
        self._send_json(status, {"error": exc.payload()})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            raise ApiError("BAD_REQUEST", "request body too large")
        raw = self.rfile.read(length) if length else b"{}"
        try:
            doc = json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise ApiError("BAD_REQUEST", f"malformed JSON: {exc.msg}")
        if not isinstance(doc, dict):
            raise ApiError("BAD_REQUEST", "body must be a JSON object")
        return doc

    def _dispatch(self, handler, *args):
        try:
            status, doc = handler(*args)
            self._send_json(status, doc)
        except FabricError as exc:
            self._send_error_doc(exc)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json(500, {"error": {"code": "INTERNAL",
                                            "message": str(exc)}})

    def do_OPTIONS(self):
        self.send_response(204)
        if self.allow_origin:
            self.send_header("Access-Control-Allow-Origin", self.allow_origin)
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- routes -----------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        routes = {
            "/v1/topology": self._get_topology,
            "/v1/state": self._get_state,
            "/v1/addressmap": self._get_addressmap,
            "/v1/p2p": self._get_p2p,
            "/v1/scaling/predict": self._get_predict,
            "/v1/pool": self._get_pool,
        }
        handler = routes.get(url.path)
        if handler is None:
            self._send_error_doc(ApiError("NOT_FOUND",
                                          f"no such endpoint: {url.path}"))
            return
        self._dispatch(handler, query)

    def do_POST(self):
        url = urlparse(self.path)
        routes = {
            "/v1/compose": lambda: self._post_mutation("compose"),
            "/v1/decompose": lambda: self._post_mutation("decompose"),
            "/v1/plan": self._post_plan,
            "/v1/scaling/fit": self._post_fit,
        }
        handler = routes.get(url.path)
        if handler is None:
            self._send_error_doc(ApiError("NOT_FOUND",
                                          f"no such endpoint: {url.path}"))
            return
        self._dispatch(handler)

    def _get_topology(self, query):
        return 200, scenario_io.topology_to_doc(self.gateway.topo)

    def _get_state(self, query):
        state = self.gateway.snapshot()
        return 200, scenario_io.composition_to_doc(state, self.gateway.topo)

    def _get_addressmap(self, query):
        host_id = _query_param(query, "host", required=True)
        gw = self.gateway
        host = gw.topo.host(host_id)
        state = gw.snapshot()
        view = gw.topo.restricted_to(state.assigned_to(host_id))
        addr_map = enumerate_host(host, view, gw.composer.policy)
        return 200, json.loads(scenario_io.export_address_map(addr_map, view))

    def _get_p2p(self, query):
        gw = self.gateway
        a = _query_param(query, "a", required=True)
        b = _query_param(query, "b", required=True)
        raw_eff = _query_param(query, "efficiency")
        try:
            efficiency = (perf.DEFAULT_EFFICIENCY if raw_eff is None
                          else float(raw_eff))
        except ValueError:
            raise ApiError("BAD_REQUEST",
                           f"efficiency must be a number, got {raw_eff!r}")
        path = perf.p2p_path(gw.topo, gw.snapshot(), a, b)
        est = perf.p2p_bandwidth(gw.topo, path, efficiency)
        return 200, scenario_io.bandwidth_estimate_to_doc(est)

    def _get_predict(self, query):
        raw_n = _query_param(query, "n", required=True)
        try:
            n = int(raw_n)
        except ValueError:
            raise ApiError("BAD_REQUEST", f"n must be an integer, got {raw_n!r}")
        minutes = perf.predict_runtime(self.gateway.model(), n)
        return 200, {"n": n, "minutes": minutes}

    def _get_pool(self, query):
        gw = self.gateway
        host_id = _query_param(query, "host", required=True)
        raw_required = _query_param(query, "required", required=True)
        try:
            required = scenario_io.parse_size(raw_required)
        except ValueError as exc:
            raise ApiError("BAD_REQUEST", str(exc))
        pool = perf.vram_pool(gw.topo, gw.snapshot(), host_id)
        result = perf.fits_in_pool(pool, required)
        return 200, scenario_io.feasibility_to_doc(host_id, pool, required,
                                                   result)

    def _post_mutation(self, action: str):
        body = self._body()
        host = body.get("host")
        if not isinstance(host, str):
            raise ApiError("BAD_REQUEST", "host must be a string")
        endpoints = body.get("endpoints")
        if not isinstance(endpoints, list) \
                or not all(isinstance(e, str) for e in endpoints):
            raise ApiError("BAD_REQUEST", "endpoints must be a string list")
        expected = _int_field(body, "expected_version")
        state = self.gateway.mutate(action, host, endpoints, expected)
        return 200, scenario_io.composition_to_doc(state, self.gateway.topo)

    def _post_plan(self):
        body = self._body()
        count = _int_field(body, "gpu_count")
        policy = body.get("policy", "locality")
        try:
            request = PlanRequest(gpu_count=count,
                                  policy=PlanPolicy(policy),
                                  host_id=body.get("host"))
        except ValueError as exc:
            raise ApiError("BAD_REQUEST", str(exc))
        chosen = self.gateway.composer.plan(self.gateway.snapshot(), request)
        return 200, {"endpoints": chosen, "policy": request.policy.value}

    def _post_fit(self):
        body = self._body()
        points = body.get("points")
        if not isinstance(points, list):
            raise ApiError("BAD_REQUEST", "points must be a list of [n, minutes]")
        try:
            model = perf.fit_scaling([(n, t) for n, t in points])
        except (TypeError, ValueError) as exc:
            raise ApiError("BAD_REQUEST", f"malformed points: {exc}")
        self.gateway.set_model(model)
        return 200, scenario_io.scaling_model_to_doc(model)


def make_server(scenario: ScenarioFile, listen_addr: str = "127.0.0.1:0",
                allow_origin: str | None = None,
                state_file: str | None = None) -> ThreadingHTTPServer:
    """Build a ready ThreadingHTTPServer; caller runs serve_forever()."""
    host, _, port = listen_addr.rpartition(":")
    if not host:
        host, port = "127.0.0.1", listen_addr or "0"
    gateway = Gateway(scenario, state_file=state_file)

    class BoundHandler(GatewayHandler):
        pass

    BoundHandler.gateway = gateway
    BoundHandler.allow_origin = allow_origin
    server = ThreadingHTTPServer((host, int(port)), BoundHandler)
    server.gateway = gateway
    return server


def serve(scenario: ScenarioFile, listen_addr: str = "127.0.0.1:8721",
          allow_origin: str | None = None,
          state_file: str | None = None) -> ThreadingHTTPServer:
    """Spec'd entry point; returns the running-ready service."""
    return make_server(scenario, listen_addr, allow_origin, state_file)
