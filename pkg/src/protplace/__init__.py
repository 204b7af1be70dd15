"""Minimum-cost perfect protection placement for power-network measurements."""
