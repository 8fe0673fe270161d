"""Semi-discrete Engquist-Osher schemes for degenerate convection-diffusion equations."""

__version__ = "0.1.0"
