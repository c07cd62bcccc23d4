"""
CVSS Scoring Bench

Measures how well large language models assign CVSS v3.1 base metrics from
CVE descriptions, and whether a meta-classifier over several models does
better than any one of them.
"""

__version__ = "1.0.0"
