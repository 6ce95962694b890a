"""Resistor-network models and a characterization pipeline for knitted force sensors."""

__version__ = "0.1.0"
