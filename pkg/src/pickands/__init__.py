"""Pickands-type constants: estimators, simulators and reference values."""
