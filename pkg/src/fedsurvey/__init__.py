"""Local, centralized and federated learning on multi-site tabular data."""

__version__ = "0.1.0"
