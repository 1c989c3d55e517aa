"""Numerical verification toolkit for a modulated self-similar blow-up construction
in axisymmetric Euler flow driven by electrostatic forcing."""

from .config import Config, ConfigError, parse_config
from .core import Field, Grid, Parameters, RadialFunction, make_grid, make_parameters

__all__ = ["Config", "ConfigError", "Field", "Grid", "Parameters", "RadialFunction", "make_grid", "make_parameters", "parse_config"]
__version__ = "0.1.0"
