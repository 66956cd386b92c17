"""Self-replicating neural networks: MLPs trained to output their own weights."""

__version__ = "0.1.0"
