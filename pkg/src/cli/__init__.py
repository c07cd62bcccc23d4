"""
CLI Module

Subcommand implementations, console messages and SVG figures.
"""
