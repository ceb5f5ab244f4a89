"""Detect interacting pairs and groups from wearable BLE and motion logs."""
from .errors import GroupSenseError

__version__ = "0.1.0"
__all__ = ["GroupSenseError", "__version__"]
