"""Desk-scale big-data-analytics benchmark suite: PCA, k-means and SVM kernels over message-passing ranks."""

__version__ = "0.1.0"
