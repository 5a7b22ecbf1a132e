"""Quasi-stationary distributions of the absorbed Ornstein-Uhlenbeck process."""

__version__ = "0.1.0"
