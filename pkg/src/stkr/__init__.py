"""Spectrally transformed kernel regression on graphs."""

from .estimators import (LabelPropagation, SpectralKernelClassifier, SpectralKernelRegressor,
                         TopDClassifier, TopDKernelPCA)
from .graph_data import GraphDataset, SplitSpec, VisibleGraph, load_dataset, make_split, mask_visible
from .kernel import SparseGram, build_normalized_kernel, kernel_row
from .solvers import (ConvergenceError, StkrModel, auto_step, fit_direct, fit_richardson_inverse,
                      fit_richardson_poly, predict)
from .transform import InverseTransform, PolyTransform, TopD, inverse_laplacian, parse_transform

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "GraphDataset", "InverseTransform", "LabelPropagation", "PolyTransform",
    "SparseGram", "SpectralKernelClassifier", "SpectralKernelRegressor", "SplitSpec", "StkrModel",
    "TopD", "TopDClassifier", "TopDKernelPCA", "VisibleGraph", "auto_step",
    "build_normalized_kernel", "fit_direct", "fit_richardson_inverse", "fit_richardson_poly",
    "inverse_laplacian", "kernel_row", "load_dataset", "make_split", "mask_visible",
    "parse_transform", "predict",
]
