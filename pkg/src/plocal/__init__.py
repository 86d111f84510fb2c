"""Computations with discrete p-toral groups, fusion and transporter
systems, unstable Adams operations, and stable-element cohomology,
all at finite truncation levels with exact integer arithmetic."""

__version__ = "0.1.0"
