"""Scenario configuration and curve table parsers."""
