"""
Data Module

CVE record ingestion, the chat-completion HTTP client and the replay cache.
"""
