"""BLAS threading control for the compute-heavy entry points.

All matrices in this package are desk-scale (a few hundred rows at most);
multi-threaded BLAS spends far more time spinning than computing on them and
can slow the tuner and the Monte Carlo driver by an order of magnitude. The
heavy entry points therefore run with BLAS pinned to one thread. A no-op
fallback keeps everything working when threadpoolctl is unavailable.
"""

from __future__ import annotations

from contextlib import contextmanager

try:
    from threadpoolctl import ThreadpoolController

    _controller = ThreadpoolController()

    @contextmanager
    def single_threaded_blas():
        with _controller.limit(limits=1, user_api="blas"):
            yield

except ImportError:  # pragma: no cover

    @contextmanager
    def single_threaded_blas():
        yield
