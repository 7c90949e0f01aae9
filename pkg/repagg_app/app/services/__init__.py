"""
Services package for RepAgg.
Contains the pipeline service that runs the stages of a command.
"""
