"""Backend selection for the compute kernels.

The compiled extension (cropshot._ckernels) is preferred when importable;
otherwise the pure-numpy twin takes over. Set CROPSHOT_BACKEND=python or
=cython to force a choice (forcing cython errors if the extension is
missing rather than silently falling back).
"""

from __future__ import annotations

import os

from cropshot import _kernels_py
from cropshot.errors import ValidationError

try:
    from cropshot import _ckernels
except ImportError:
    _ckernels = None


def available_backends() -> dict[str, object]:
    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    return backends


def get_backend(name: str):
    backends = available_backends()
    if name not in backends:
        raise ValidationError(
            f"kernel backend {name!r} unavailable (have: {sorted(backends)})"
        )
    return backends[name]


def _select():
    forced = os.environ.get("CROPSHOT_BACKEND")
    if forced:
        return get_backend(forced)
    return _ckernels if _ckernels is not None else _kernels_py


_active = _select()

BACKEND = _active.BACKEND_NAME
train_linear_head = _active.train_linear_head
soft_kmeans = _active.soft_kmeans
