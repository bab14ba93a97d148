"""Polarization-multiplexed Golay-code interrogation of fiber Bragg grating sensor arrays."""

__version__ = "0.1.0"
