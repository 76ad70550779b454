"""Selects the compiled kernels when available, else the numpy fallback.

Set BLASCHKE_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels as python

compiled = None
if not os.environ.get("BLASCHKE_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

lift = active.lift
lift_derivative = active.lift_derivative
inverse_lift = active.inverse_lift
pullback = active.pullback
de_barycenter = active.de_barycenter
de_dilatation = active.de_dilatation
poisson_mean = active.poisson_mean
