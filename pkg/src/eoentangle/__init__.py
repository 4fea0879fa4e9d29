"""Simulation and data reduction for pulsed cavity electro-optic entanglement."""
__version__ = "0.1.0"
