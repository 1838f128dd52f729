"""Bradley-Terry rating models, pre-game features and forecasting experiments for AFL data."""

__version__ = "0.1.0"
