"""
Pydantic models for the aot toolkit.

This module contains the Pydantic models used throughout the package for
data validation, serialization, and documentation.
"""
