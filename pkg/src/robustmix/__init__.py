"""Least-cost PV + storage sizing for near-100% renewable electricity systems."""

__version__ = "0.1.0"
