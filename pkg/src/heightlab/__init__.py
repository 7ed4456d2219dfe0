"""Heights, torsion parameters and Betti maps on elliptic surfaces over Q(t)."""

__version__ = "0.1.0"
