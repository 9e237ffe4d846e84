"""linkforge-server: inference shim for the linkforge backend wire contract."""

__version__ = "0.1.0"
