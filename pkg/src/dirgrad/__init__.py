"""Directional-derivative stochastic optimization."""
