"""Exception types shared across the package.

Four failure categories are kept distinct so callers can react precisely:
bad configuration, bad caller data, malformed model output, and transport
failures. Strict replay misses get their own type because runners treat
them as a hard stop rather than a retryable fault.
"""
from __future__ import annotations


class RewriteLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RewriteLabError, ValueError):
    """A config value or hyperparameter is outside its documented range."""


class ContractError(RewriteLabError, ValueError):
    """Caller-supplied data violates a documented precondition."""


class ProtocolError(RewriteLabError, RuntimeError):
    """A model response or wire payload could not be interpreted."""


class TransportError(RewriteLabError, RuntimeError):
    """The network layer failed after exhausting retries."""


class CacheMissError(RewriteLabError, LookupError):
    """A request key is absent from the replay cache in strict mode."""
