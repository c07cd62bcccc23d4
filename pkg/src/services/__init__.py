"""
Services Module

Prompting, prediction collection, evaluation, text analysis,
meta-classification and report assembly.
"""
