"""Map-aware human trajectory/pose forecasting and follow-ahead planning."""

__version__ = "0.1.0"
