"""Batch analytics for the 2017 collaborative-canvas experiment.

Reconstructs the canvas from the public placement log, measures each
community's artwork, derives success labels, extracts per-community
features from two time windows, trains success-prediction models, and
explains them with exact Shapley attributions.
"""

__version__ = "0.1.0"
