"""Numerics for port-based (asymptotic) teleportation with qubit and qudit resources."""

__version__ = "0.1.0"
