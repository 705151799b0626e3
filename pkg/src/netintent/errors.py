"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class NetIntentError(Exception):
    """Base class for all errors raised by netintent."""


# -- flow model -------------------------------------------------------------

class FlowModelError(NetIntentError):
    pass


class MalformedJson(FlowModelError):
    pass


class UnknownShape(FlowModelError):
    pass


class FieldDomain(FlowModelError):
    pass


class DialectUnrepresentable(FlowModelError):
    pass


# -- conflict engine ---------------------------------------------------------

class DomainMismatch(NetIntentError):
    pass


class UniverseTooLarge(NetIntentError):
    pass


# -- llm gateway -------------------------------------------------------------

class LlmError(NetIntentError):
    pass


class LlmTimeout(LlmError, TimeoutError):
    pass


class TransportError(LlmError):
    pass


class ServerError(LlmError):
    def __init__(self, status: int, body: str):
        super().__init__(f"model server returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class NoJsonFound(NetIntentError):
    pass


class KTooLarge(NetIntentError, ValueError):
    pass


class TemplateMissing(NetIntentError):
    pass


# -- activation / store ------------------------------------------------------

class Unclassifiable(NetIntentError):
    pass


class StoreError(NetIntentError, OSError):
    pass


class CorruptRecord(NetIntentError):
    def __init__(self, line_no: int, reason: str = ""):
        super().__init__(f"corrupt IntentStore record at line {line_no}: {reason}")
        self.line_no = line_no


class InvalidTransition(NetIntentError):
    pass


# -- controllers -------------------------------------------------------------

class ControllerError(NetIntentError):
    pass


class ControllerUnreachable(ControllerError):
    pass


class InstallRejected(ControllerError):
    def __init__(self, status: int, body: str):
        super().__init__(f"controller rejected flow (HTTP {status}): {body[:200]}")
        self.status = status
        self.body = body


class VerifyFailed(ControllerError):
    pass


class NoSuchDevice(ControllerError):
    pass


class NoSuchFlow(ControllerError):
    pass


# -- assurance ---------------------------------------------------------------

class UnresolvableEndpoints(NetIntentError):
    pass


class CounterRegression(NetIntentError):
    pass


class NoActionableSuggestion(NetIntentError):
    pass


# -- benchmark ---------------------------------------------------------------

class SchemaError(NetIntentError):
    def __init__(self, case_id: str, reason: str):
        super().__init__(f"case {case_id!r}: {reason}")
        self.case_id = case_id


class LengthMismatch(NetIntentError, ValueError):
    pass
