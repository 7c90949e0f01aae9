"""
Tools package for RepAgg.
Contains single-responsibility tools: parsing, profiling, cross-validation,
aggregation and metrics.
"""
