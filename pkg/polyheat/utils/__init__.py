"""Utility modules for run configuration and report generation."""
