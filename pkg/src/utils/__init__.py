"""
Utilities Module

Contains configuration management, logging, and persistence helpers.
"""
