"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the numpy implementation is
the drop-in fallback.  ``BACKEND`` reports which one won.  Both are kept
importable so the benchmark suite can compare them side by side.
"""

from . import _pure

try:
    from . import _core

    _impl = _core
    BACKEND = "compiled"
except ImportError:  # extension not built; numpy twin takes over
    _impl = _pure
    BACKEND = "numpy"

Grower = _impl.Grower
predict_margins = _impl.predict_margins
filter_rms = _impl.filter_rms

pure = _pure
compiled = _impl if BACKEND == "compiled" else None

__all__ = ["BACKEND", "Grower", "predict_margins", "filter_rms", "pure", "compiled"]
