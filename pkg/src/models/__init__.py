"""
Models Module

CVSS v3.1 domain types, dataset records and the exception hierarchy.
"""
