"""Deterministic discrete-event simulator of payment-channel networks carrying covert command channels."""

__version__ = "0.1.0"
