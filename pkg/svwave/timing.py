"""
Timing Utilities
Wall-clock helpers for performance logging of studies
"""
import time


class Stopwatch:
    """
    Measures elapsed wall time.
    
    Usage:
        watch = Stopwatch()
        run_study()
        log_performance(logger, "commutator-study", watch.elapsed_ms())
    """
    
    def __init__(self):
        self.start_time = time.perf_counter()
    
    def elapsed_ms(self):
        """Milliseconds since construction"""
        return (time.perf_counter() - self.start_time) * 1000.0
