"""Instrumented operation counter.

Every substrate op reports an approximate FLOP cost and the element count of
its output while a counter is active. Used by the complexity benchmarks to
measure quadratic-vs-linear scaling of the attention stage without relying
on wall-clock time.
"""

from contextlib import contextmanager


class OpCounter:
    """Accumulates FLOPs and tracks the largest single buffer allocated."""

    __slots__ = ("active", "flops", "peak_elements")

    def __init__(self):
        self.active = False
        self.flops = 0
        self.peak_elements = 0

    def reset(self):
        self.flops = 0
        self.peak_elements = 0

    def record(self, nflops, nelements):
        if self.active:
            self.flops += int(nflops)
            if nelements > self.peak_elements:
                self.peak_elements = int(nelements)


counter = OpCounter()


@contextmanager
def count_ops():
    """Activate the global counter for the duration of a block.

    Not reentrant; nested activations share one tally.
    """
    was_active = counter.active
    if not was_active:
        counter.reset()
    counter.active = True
    try:
        yield counter
    finally:
        counter.active = was_active
