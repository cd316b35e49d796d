"""The PCA, k-means and SVM benchmark kernels and their dense subroutines."""

from .kmeans import KmeansResult, init_from_rows, kmeans_lloyd
from .linalg import NumericError, jacobi_eigh, svd_factor, symmetric_eigenvalues
from .neldermead import NmParams, NmResult, nelder_mead
from .pca import PcaResult, pca_sdev
from .svm import SvmModel, hinge_loss, svm_accuracy, svm_fit

__all__ = [
    "KmeansResult",
    "NmParams",
    "NmResult",
    "NumericError",
    "PcaResult",
    "SvmModel",
    "hinge_loss",
    "init_from_rows",
    "jacobi_eigh",
    "kmeans_lloyd",
    "nelder_mead",
    "pca_sdev",
    "svd_factor",
    "svm_accuracy",
    "svm_fit",
    "symmetric_eigenvalues",
]
