"""2D radar echo simulation and reconstruction.

Frequency-domain imaging operators with exact adjoints, an inversion-free
ADMM solver with l1/TV priors, a small unfolded network with learnable
regularizers trained by a from-scratch reverse-mode engine, magnitude-domain
quality metrics, and deterministic synthetic data generation.
"""

__version__ = "0.1.0"
