"""tsvmorph: via surface-map ingestion, cropping, labeling, and CNN training."""

__version__ = "0.1.0"
