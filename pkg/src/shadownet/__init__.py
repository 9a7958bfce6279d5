"""Shadow generative model for ReLU networks."""
__version__ = "0.1.0"
