"""Strong convergence of random representations of free groups and spectral
gaps of random covers of a hyperbolic surface, as numerical experiments."""

__version__ = "0.1.0"
