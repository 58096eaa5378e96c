"""Hypervolume and R2 indicators, their Gaussian expectations, and BO loops built on them."""
from .ehvi import ehvi_exact, ehvi_mc_oracle, tehvi
from .er2i_acquisition import er2i_discrete, er2i_quadrature
from .gaussian_kernels import Gaussian1D, ei_exceed, ei_shortfall
from .pareto_geometry import Orientation, hvi, hypervolume, pareto_filter
from .r2_indicator import (
    TchebycheffParams,
    discrete_r2,
    r2_improvement_exact_2d,
    r2_value_exact_2d,
    tsm,
)

__version__ = "0.1.0"
