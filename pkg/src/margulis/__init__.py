"""Flat and anti-de Sitter Lorentzian 3-manifolds with Schottky linear part:
properness certificates, timelike fibrations, and projective transitions."""

__version__ = "0.1.0"
