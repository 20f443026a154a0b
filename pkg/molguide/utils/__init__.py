"""Utility modules: config, logging, errors, checkpoint container, output files."""
