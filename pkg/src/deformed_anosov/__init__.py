"""Volume-preserving deformations of linear Anosov maps of the 3-torus.

Builds maps that agree with a hyperbolic toral automorphism outside a small
ball and carry a complex stable pair at a fixed point, then checks them
numerically: volume, cone fields, domination, Lyapunov exponents, unstable
curve coverage and ergodicity diagnostics.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .maps import (ComposedMap, LocalSurgerySpec, MatrixMap, SmoothMap, TorusAutomorphism, apply_surgery,  # noqa: F401
                   compose, linear_anosov, product_with_identity)
from .construction import (Construction, DeformationParams, construct, index_adjust,  # noqa: F401
                           periodic_adaptation)
