"""Rendering of the spin-chain state-transfer figure datasets (CSV -> image)."""

from .render import FigureSpec, RenderResult, SchemaError, build_specs, render

__version__ = "0.1.0"
