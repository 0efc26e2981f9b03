"""Unfitted Nitsche-XFEM discretization of elliptic interface problems with a
semi-geometric multigrid solver."""

__version__ = "0.1.0"
