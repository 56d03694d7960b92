"""Chart-level toolkit for log-symplectic / b-symplectic structures."""

__version__ = "0.1.0"
