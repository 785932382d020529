"""Shape calculus for a time-harmonic solid/fluid problem on randomly perturbed domains."""

__version__ = "0.1.0"
