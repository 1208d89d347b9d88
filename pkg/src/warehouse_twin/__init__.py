"""Digital-twin warehouse: floor simulation, what-if analysis, adaptive rules."""

__version__ = "0.1.0"
