"""Residual-network SSIM regressor.

Consumes the dataset generator's JSONL manifests and 16-bit PNG slices,
predicts the SSIM a clean reference would yield, and emits `id,ssim_pred`
CSVs for the evaluator.
"""

__version__ = "0.1.0"
