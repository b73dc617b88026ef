"""Diagnose the source of an LLM's uncertainty on (query, documents) cases
and resolve it via retrieval, clarification, or chain-of-thought."""

__version__ = "0.1.0"
