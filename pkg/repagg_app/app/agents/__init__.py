"""
Agents package for RepAgg.
Contains agents that render pipeline results into artifact files.
"""
