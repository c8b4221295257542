"""Gap probabilities of the Gaussian unitary ensemble and the differential
equations they satisfy in the interval endpoints."""

__version__ = "0.1.0"
