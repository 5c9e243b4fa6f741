"""Simulation and pulse optimisation of Rydberg CkZ gates driven by two-photon ARP."""

__version__ = "0.1.0"
