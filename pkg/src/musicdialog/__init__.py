"""Synthetic music-discovery dialogue generation and conversational retrieval toolkit."""

__version__ = "0.1.0"
