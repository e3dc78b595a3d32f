"""Scale-dependent entropy analysis and excess-entropy decomposition of time series."""
__version__ = "0.1.0"
