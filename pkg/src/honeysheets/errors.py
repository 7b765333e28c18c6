"""Exception types raised across the package."""

from __future__ import annotations


class HoneySheetsError(Exception):
    """Base class for all honeysheets errors."""


class UnsupportedCountry(HoneySheetsError):
    """IBAN generation asked for a country missing from the country table."""


class DenyPrefixCollision(HoneySheetsError):
    """A generated account body would start with a deny-listed institution prefix."""


class ConfigMismatch(HoneySheetsError):
    """Sheet configuration disagrees with the inputs supplied alongside it."""


class SheetMismatch(HoneySheetsError):
    """Two snapshots being diffed belong to different sheets."""


class EmptyChangeSet(HoneySheetsError):
    """Classification was asked for a change set with no changes in it."""


class BadIndex(HoneySheetsError):
    """An edit command addressed a row or column outside the grid."""


class BadDestination(HoneySheetsError):
    """A link destination is not an acceptable absolute URL."""


class KeyspaceExhausted(HoneySheetsError):
    """Every token in the registry's keyspace is already assigned."""


class MailboxError(HoneySheetsError):
    """A notification could not be delivered to the mailbox directory."""


class NotificationFormatError(HoneySheetsError):
    """A mailbox message does not parse as a notification."""


class BadBoundaries(HoneySheetsError):
    """Experiment windows overlap or are otherwise unusable."""


class ExportError(HoneySheetsError):
    """Report files could not be written."""


class InfeasibleTargets(HoneySheetsError):
    """Requested trace totals cannot be satisfied by any trace."""


class ReplayError(HoneySheetsError):
    """An action in a trace was rejected during replay.

    Carries the index of the offending action so a failed replay can be
    resumed or debugged from the exact spot.
    """

    def __init__(self, index: int, message: str):
        super().__init__(f"action {index}: {message}")
        self.index = index
