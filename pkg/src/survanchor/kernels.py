"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
versions are used. Set ``SURVANCHOR_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_forced = os.environ.get("SURVANCHOR_PURE_PYTHON", "") in ("1", "true", "yes")
_impl = _compiled if (_compiled is not None and not _forced) else _pykernels
BACKEND = "cython" if _impl is _compiled else "numpy"


def _prep(scores, time, event):
    return (
        np.ascontiguousarray(scores, dtype=np.float64),
        np.ascontiguousarray(time, dtype=np.float64),
        np.ascontiguousarray(event, dtype=np.int64),
    )


def cox_loss_grad(scores, time, event, impl=None):
    """Negative Cox partial log-likelihood (sum over events) and its gradient."""
    s, t, e = _prep(scores, time, event)
    return (impl or _impl).cox_loss_grad(s, t, e)


def concordance_counts(risk, time, event, impl=None):
    """(concordant, tied, comparable) pair counts for Harrell's C."""
    r, t, e = _prep(risk, time, event)
    return (impl or _impl).concordance_counts(r, t, e)


def kendall_s(x, y, impl=None):
    """Concordant minus discordant pair count."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return int((impl or _impl).kendall_s(x, y))


def implementations():
    """Mapping of available backend name -> module, for tests and benchmarks."""
    out = {"numpy": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
