"""Regression MLPs sized by non-parametric clustering.

The pipeline: cluster the training split with X-means (or DBSCAN /
MeanShift), use the cluster count as the hidden-layer width of a
three-layer perceptron, and train the network with L-BFGS.
"""

__version__ = "0.1.0"
