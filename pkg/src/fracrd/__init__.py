"""Fractional reaction-diffusion systems on an interval."""
