"""Bocher contractions of conformally superintegrable 3D Laplace systems.

A symbolic engine over exact complex-rational constants that verifies the
symmetry structure of the cataloged systems, applies the six special
contractions of the conformal algebra so(5, C), and reproduces the
contraction graph of semidegenerate and fourth-order systems.
"""

__version__ = "0.1.0"

from .expr import (  # noqa: F401
    Expr,
    add,
    con,
    differentiate,
    div,
    mul,
    pow_,
    sqrt,
    sub,
    substitute,
    sym,
    symbols,
)
from .numeric import (  # noqa: F401
    DEFAULT_CONFIG,
    SamplePoint,
    TestConfig,
    evaluate,
    identity_test,
)
from .sexpr import dumps, loads  # noqa: F401
