"""Closed-form optimal and robust-optimal errors for simple generative models."""
