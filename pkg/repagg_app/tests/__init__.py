"""
Test package for the RepAgg application.
"""
