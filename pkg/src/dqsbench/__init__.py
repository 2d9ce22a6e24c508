"""Simulation benchmark for Trotterization, zero-noise extrapolation and recompilation."""
