#!/usr/bin/env python3
"""Drive a gateway the way the web console does.

Starts the HTTP service on an ephemeral port, composes GPUs with
optimistic versioning, provokes a version conflict and an exhaustion
error, and reads the what-if endpoints.
"""

import json
import threading
import urllib.request

from fabricsim.gateway import make_server
from fabricsim.scenario import load_scenario

server = make_server(load_scenario("reference_32gpu"), "127.0.0.1:0")
port = server.server_address[1]
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{port}"
print(f"gateway on {base}\n")


def call(method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(f"{base}{path}", data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


status, state = call("GET", "/v1/state")
print(f"GET /v1/state -> {status}, version {state['version']}, "
      f"{len(state['pool'])} pooled")

status, planned = call("POST", "/v1/plan",
                       {"gpu_count": 8, "policy": "locality"})
print(f"POST /v1/plan -> {status}, {planned['endpoints']}")

status, state = call("POST", "/v1/compose", {
    "host": "h0", "endpoints": planned["endpoints"],
    "expected_version": state["version"]})
print(f"POST /v1/compose -> {status}, version {state['version']}")

status, err = call("POST", "/v1/compose", {
    "host": "h0", "endpoints": ["gpu30"], "expected_version": 0})
print(f"stale compose -> {status} {err['error']['code']}")

status, est = call("GET", "/v1/p2p?a=gpu00&b=gpu07")
print(f"GET /v1/p2p gpu00..gpu07 -> {est['estimated_bw']} GB/s, "
      f"{est['hop_count']} hops")

status, amap = call("GET", "/v1/addressmap?host=h0")
print(f"GET /v1/addressmap -> {amap['placement_bytes_total']} bytes placed")

status, model = call("POST", "/v1/scaling/fit", {
    "points": [[8, 1145.0], [16, 603.5], [32, 299.2]]})
status, pred = call("GET", "/v1/scaling/predict?n=64")
print(f"fit + predict(64) -> {pred['minutes']:.1f} min")

status, pool = call("GET", "/v1/pool?host=h0&required=1TB")
print(f"GET /v1/pool required=1TB -> feasible={pool['feasible']}, "
      f"margin {pool['margin_bytes'] / 1e9:.0f} GB")

server.shutdown()
