"""Numerics for compact rotationally symmetric ancient Ricci flow ovals.

Submodules:
    geometry   -- warped-product profiles and curvature fields
    flow       -- method-of-lines evolution of the profile equation
    rescaled   -- cylinder-frame rescaling and Hermite mode analysis
    bryant     -- steady soliton ODE, tail constants, cap profiles
    barriers   -- comparison-principle supersolutions and ordering checks
    heatkernel -- Dirichlet heat kernel on an interval by images
    regimes    -- the three asymptotic regimes (parabolic, intermediate, tip)
    ansatz     -- composite oval initial data
    cli        -- command-line entry points
"""

__version__ = "0.1.0"

from . import barriers, bryant, flow, geometry, heatkernel, rescaled  # noqa: F401
