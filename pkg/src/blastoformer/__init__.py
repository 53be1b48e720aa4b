"""Blast maximum-pressure surrogates: BlastOFormer, FNO and CNN baselines,
an analytic data oracle, and the training/evaluation harness."""

__version__ = "0.1.0"
