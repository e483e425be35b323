"""Crowdsourcing scheduling engine, worker notification, and simulator."""

__version__ = "0.1.0"
