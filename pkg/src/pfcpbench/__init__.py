"""Anomaly-detection benchmark harness for 5G-core PFCP control-plane
traffic: security-aware preprocessing, a twelve-detector one-class catalog,
score-stacking ensembles, and budgeted black-box evasion attacks."""

__version__ = "0.1.0"
