"""Deterministic plotting for qcslab result directories."""

from .figures import RENDERERS, plot_recipe

__all__ = ["plot_recipe", "RENDERERS"]
