"""Harness that drives an LLM through compile/test feedback loops on Idris exercises."""

__version__ = "0.1.0"
