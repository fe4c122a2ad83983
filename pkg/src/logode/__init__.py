"""Numerics for differential equations driven by weak geometric rough paths.

Module map:

- :mod:`logode.tensor`  - truncated tensor algebra over R^d
- :mod:`logode.lie`     - Dynkin/Lie tests, BCH, word shuffles
- :mod:`logode.paths`   - lifted drivers, p-variation, controls, partition ops
- :mod:`logode.fields`  - polynomial vector fields and the directional calculus
- :mod:`logode.solve`   - log-ODE / high-order Euler solvers and rate studies
- :mod:`logode.cli`     - batch front door emitting JSON reports
"""

from . import errors, fields, lie, paths, solve, tensor

__all__ = ["errors", "fields", "lie", "paths", "solve", "tensor"]
__version__ = "0.1.0"
