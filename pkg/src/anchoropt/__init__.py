"""Anchor layout optimization for ultrasonic time-of-flight indoor positioning."""

__version__ = "0.1.0"
