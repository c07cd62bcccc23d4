"""
Test Module

Contains the unit and end-to-end tests for the CVSS scoring bench.
"""
