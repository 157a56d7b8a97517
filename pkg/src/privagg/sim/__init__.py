"""Scenario harness: configuration, trace ingestion, the tick loop and result files."""
