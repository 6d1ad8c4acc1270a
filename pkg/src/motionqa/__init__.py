"""Reference-free MRI image quality assessment toolkit.

Synthesizes motion-corrupted brain-MR slices with exact SSIM ground-truth
labels, and evaluates SSIM-regression predictors (residual statistics,
class binning, classification reports, clinical agreement rate).
"""

__version__ = "0.1.0"
