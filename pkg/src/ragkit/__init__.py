"""Retrieval-augmented generation toolkit and evaluation harness for technical documents."""

__version__ = "0.1.0"
