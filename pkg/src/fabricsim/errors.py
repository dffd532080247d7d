"""Error types shared across the fabric simulator.

Every domain error carries a stable machine-readable ``code`` so the CLI and
the HTTP gateway can map failures without string matching.
"""

from __future__ import annotations


class FabricError(Exception):
    """Base class for all domain errors."""

    code = "FABRIC_ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def payload(self) -> dict:
        """Structured detail for machine output (extended by subclasses)."""
        return {"code": self.code, "message": str(self)}


class TopologyError(FabricError):
    """Topology failed validation or referenced an unknown node."""

    code = "INVALID_TOPOLOGY"


class UnknownNodeError(TopologyError):
    code = "UNKNOWN_NODE"


class BusNumberExhaustion(FabricError):
    """More than 256 bus numbers would be required."""

    code = "BUS_EXHAUSTION"


class ExhaustionError(FabricError):
    """Aligned BAR placements do not fit below the host's address limit.

    ``devices_placed`` counts endpoints whose every BAR was placed before the
    first failing allocation; ``required_bytes`` is the reserved footprint of
    the BAR that failed and ``available_bytes`` the largest aligned span that
    was still free for it.
    """

    code = "ADDRESS_EXHAUSTION"

    def __init__(self, required_bytes: int, available_bytes: int,
                 devices_placed: int, devices_total: int):
        self.required_bytes = required_bytes
        self.available_bytes = available_bytes
        self.devices_placed = devices_placed
        self.devices_total = devices_total
        super().__init__(
            f"address space exhausted: placed {devices_placed} of "
            f"{devices_total} devices (next BAR needs {required_bytes} bytes, "
            f"{available_bytes} available)")

    def payload(self) -> dict:
        return {
            "code": self.code,
            "message": str(self),
            "required_bytes": self.required_bytes,
            "available_bytes": self.available_bytes,
            "devices_placed": self.devices_placed,
            "devices_total": self.devices_total,
        }


class CompositionError(FabricError):
    """A compose/decompose/plan request was rejected; state is unchanged."""

    def __init__(self, code: str, message: str, *,
                 profile_name: str | None = None,
                 exhaustion: ExhaustionError | None = None):
        super().__init__(message, code)
        self.profile_name = profile_name
        self.exhaustion = exhaustion

    def payload(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.profile_name is not None:
            out["profile"] = self.profile_name
        if self.exhaustion is not None:
            out["exhaustion"] = self.exhaustion.payload()
        return out


class PathError(FabricError):
    """Peer-to-peer path could not be derived for the requested pair."""

    code = "NOT_COMPOSED"


class ScenarioError(FabricError):
    """Scenario document failed to parse or validate."""

    code = "INVALID_SCENARIO"

    def __init__(self, issues: list[dict]):
        self.issues = issues
        lines = "; ".join(f"{i['path']}: {i['message']}" for i in issues)
        super().__init__(f"invalid scenario: {lines}")

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self), "issues": self.issues}
