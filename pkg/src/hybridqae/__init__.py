"""Hybrid quantum-classical compression and classification of sensor data."""
