"""Distance-distributed designs for Gaussian process surrogates."""
__version__ = "0.1.0"
