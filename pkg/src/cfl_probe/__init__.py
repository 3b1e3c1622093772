"""Bounded-PDA oracles, annotated CFL datasets, and toy-scale oracle-trained
sequence models on a self-contained reverse-mode autodiff."""

__version__ = "0.1.0"
