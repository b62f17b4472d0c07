"""Executable SO(3)-invariant G2-cobordism models on homogeneous 3-manifolds."""

__version__ = "0.1.0"
