"""Decoy spreadsheet honeytokens with end-to-end activity monitoring.

The pipeline: honeygen fabricates fake payroll sheets, honeylink mints
tracked short links and runs the redirect-and-log tracker, sheetstore
snapshots and diffs documents, notify moves events through a mailbox,
leak publishes themed posts, simharness drives simulated visitors, and
analytics folds everything into attacker-activity reports.
"""

__version__ = "0.1.0"
