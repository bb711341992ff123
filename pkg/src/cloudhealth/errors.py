"""Exception hierarchy shared across the cloudhealth package."""

from __future__ import annotations


class CloudHealthError(Exception):
    """Base class for all cloudhealth errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self), "details": getattr(self, "details", None)}


class ParseError(CloudHealthError):
    """Malformed input document (not even structurally readable)."""

    code = "parse_error"


class ValidationError(CloudHealthError):
    """Structurally readable but semantically invalid; carries all violations."""

    code = "validation_error"

    def __init__(self, violations):
        self.violations = list(violations)
        self.details = self.violations
        super().__init__("; ".join(self.violations))


class ConflictError(CloudHealthError):
    code = "conflict"


class UnknownNode(CloudHealthError):
    code = "unknown_node"


class UnresolvedStub(CloudHealthError):
    """Selected node's subtree has no metric leaves (flagged stub)."""

    code = "unresolved_stub"


class NoProbeForMetric(CloudHealthError):
    code = "no_probe_for_metric"

    def __init__(self, metric_id, service_id, layer):
        self.metric_id = metric_id
        self.service_id = service_id
        self.layer = layer
        self.details = {"metric": metric_id, "service": service_id, "layer": str(layer)}
        super().__init__(f"no probe provides {metric_id} at layer {layer} for service {service_id}")


class UnknownMetric(CloudHealthError):
    code = "unknown_metric"


class UnknownProbe(CloudHealthError):
    code = "unknown_probe"


class StaleSample(CloudHealthError):
    code = "stale_sample"


class UnitMismatch(CloudHealthError):
    code = "unit_mismatch"


class NonBooleanSeries(CloudHealthError):
    code = "non_boolean_series"


class UnknownSelection(CloudHealthError):
    code = "unknown_selection"


class VersionMismatch(CloudHealthError):
    code = "version_mismatch"


class NoViableMode(CloudHealthError):
    code = "no_viable_mode"


class EnvError(CloudHealthError):
    code = "env_error"


class SpawnFailed(CloudHealthError):
    code = "spawn_failed"


class AccessDenied(CloudHealthError):
    code = "access_denied"


class InvalidScenario(CloudHealthError):
    code = "invalid_scenario"


class PastEvent(CloudHealthError):
    code = "past_event"


class OverlapError(CloudHealthError):
    code = "overlap_error"
