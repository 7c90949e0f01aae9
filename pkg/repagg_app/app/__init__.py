"""
Reputation Aggregation Engine (RepAgg).
Predicts consumer reliability weights from rating profiles and scores products.
"""

__version__ = "1.0.0"
