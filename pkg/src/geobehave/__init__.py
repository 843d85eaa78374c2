"""Location-aware behavioural indicators from wearable and phone sensor streams."""

__version__ = "0.1.0"
