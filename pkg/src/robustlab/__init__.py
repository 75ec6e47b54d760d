"""Desk-scale robust learning laboratory: dense nets, attacks, adversarial training,
loss-landscape probes, and exact checks of optimal robust classifiers."""

__version__ = "0.1.0"
