"""
Regressors used to predict consumer reliability from profile features.
"""

from repagg_app.app.learners.regressor import TrainedRegressor, fit, predict

__all__ = ["TrainedRegressor", "fit", "predict"]
