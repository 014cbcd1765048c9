"""Frame-by-frame pass target and completion probabilities from tracking data."""

SCHEMA_VERSION = "1"

__version__ = "0.1.0"
