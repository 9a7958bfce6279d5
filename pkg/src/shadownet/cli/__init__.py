"""Command-line harness: configs, weight files, reports and dispatch."""
