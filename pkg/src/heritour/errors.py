"""Exception hierarchy shared across the backend."""


class HeritourError(Exception):
    """Base class for all domain errors."""


class InvalidTemplateError(HeritourError):
    """Journey template failed structural validation."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"invalid journey template: {report.summary()}")


class UnknownPoiError(HeritourError):
    pass


class IllegalTransitionError(HeritourError):
    """A progress event targets a node whose current status rejects it."""


class StaleEventError(HeritourError):
    """Event sequence number is not ahead of the already-applied one."""


class SchemaViolationError(HeritourError):
    """Action payload does not conform to its declared action schema."""


class UnknownActionTypeError(HeritourError):
    pass


class OutOfOrderError(HeritourError):
    """Per-user action sequence has a gap or replays an old number."""


class CorruptLogError(HeritourError):
    """An event/action log violates the gapless per-user ordering."""


class UnknownDraftError(HeritourError):
    pass


class AlreadyFinalizedError(HeritourError):
    """Draft was already approved or rejected."""


class NotApprovedError(HeritourError):
    pass


class AlreadyPublishedError(HeritourError):
    pass


class EmptyBodyError(HeritourError):
    pass


class NoBaseContentError(HeritourError):
    """POI has no published content to seed narrative generation."""


class UnknownMarkerError(HeritourError):
    pass


class DuplicateMarkerError(HeritourError):
    pass


class UnknownWaypointError(HeritourError):
    pass


class UnreachableError(HeritourError):
    """No walk path connects the origin waypoint to the target POI."""


class UnknownEventError(HeritourError):
    """Ack references an event never delivered to this subscription."""


class MalformedEnvelopeError(HeritourError):
    pass


class ConfigError(HeritourError):
    pass
