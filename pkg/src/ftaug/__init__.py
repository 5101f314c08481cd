"""Feature-transform image augmentation pipelines and ensemble evaluation."""

__version__ = "0.1.0"
