"""
Metrics and error reporting.
"""
