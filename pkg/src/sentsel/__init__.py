"""Sentence-selecting text classifiers whose rationales are faithful by construction."""

__version__ = "0.1.0"
