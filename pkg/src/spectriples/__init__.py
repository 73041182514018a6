"""Laplacian spectra and eigenfunction triple products on flat tori."""

__version__ = "0.1.0"
