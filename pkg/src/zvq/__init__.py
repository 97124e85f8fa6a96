"""Speech unit discovery and voice conversion with learned bottlenecks."""

__version__ = "0.1.0"
