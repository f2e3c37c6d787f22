"""Synthesis of commutativity and mover conditions for ADT specifications."""

__version__ = "0.1.0"
