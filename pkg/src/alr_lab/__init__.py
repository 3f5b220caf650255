"""Adaptive label regularization lab: residual correlation matrix, loss terms with
analytic gradients, a hand-differentiated MLP trainer and experiment CLI."""

__version__ = "0.1.0"
