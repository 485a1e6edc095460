"""Backend selection for the trajectory kernel.

The compiled extension is used when it was built; otherwise, or when
``QPURIFY_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy implementation is used. Both expose the same ``advance`` function.
"""

import os

from . import _kernel_py


def _want_pure():
    return os.environ.get("QPURIFY_PURE_PYTHON", "") not in ("", "0")


def _load_compiled():
    try:
        from . import _kernel
    except ImportError:
        return None
    return _kernel


_compiled = None if _want_pure() else _load_compiled()

BACKENDS = {"python": _kernel_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
advance = BACKENDS[BACKEND].advance


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        name = BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}"
        ) from None
