"""Numerical operations on grid fields, grouped by concern."""
