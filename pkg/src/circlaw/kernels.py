"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when importable; otherwise, or
when ``CIRCLAW_PURE_PYTHON=1``, the numpy fallback in ``_purepy``.
"""
import os

BACKEND = "python"
if os.environ.get("CIRCLAW_PURE_PYTHON", "") != "1":
    try:
        from ._kernels import KernelError, auction, kahan_cumsum, lap_sap, network_simplex

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass
if BACKEND == "python":
    from ._purepy import KernelError, auction, kahan_cumsum, lap_sap, network_simplex

__all__ = ["BACKEND", "KernelError", "auction", "kahan_cumsum", "lap_sap", "network_simplex"]
