"""Frame-level feature extraction from XR packet traces and two-stage
residual forecasting of the resulting time series."""

__version__ = "0.1.0"
