"""Certified Jacobian attenuation bounds and Floquet spectrum diagnostics."""

__version__ = "0.1.0"
