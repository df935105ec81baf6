"""
Central Random Number Generator System
Counter-based, keyed RNG streams for reproducible and refinable noise
"""
import logging
import time

import numpy as np


# Stream channels (high bits of the second key word)
CHANNEL_BROWNIAN = 1
CHANNEL_INITIAL_DATA = 2
CHANNEL_SAMPLES = 3

SEED_LIMIT = 2**64


class SimRNG:
    """
    Keyed RNG with seed management for deterministic replays.
    
    Every draw comes from a Philox stream keyed by (seed, channel, index),
    so a block of numbers depends only on its key and never on what was
    drawn before it. This makes Brownian refinement order-independent and
    lets workers generate paths in parallel without coordination.
    
    Usage:
        rng = SimRNG(seed=12345)
        
        # Bridge normals for dyadic level 7
        z = rng.brownian_level(7, 64)
        
        # Save seed for replay
        seed = rng.get_seed()
    """
    
    def __init__(self, seed=None):
        """
        Initialize RNG system.
        
        Args:
            seed: Optional 64-bit seed for deterministic behavior.
                  If None, generates seed from current time.
        """
        if seed is None:
            seed = int(time.time() * 1000) % (2**31)
        if not 0 <= int(seed) < SEED_LIMIT:
            raise ValueError(f"Seed must lie in [0, 2**64): {seed}")
        
        self.seed = int(seed)
        logging.getLogger(__name__).debug(f"SimRNG initialized with seed: {self.seed}")
    
    def get_seed(self):
        """Get current seed for replay purposes"""
        return self.seed
    
    def stream(self, channel, index):
        """
        Generator for one keyed stream.
        
        Args:
            channel: Stream channel (CHANNEL_* constant)
            index: Index within the channel (dyadic level, sample number, ...)
            
        Returns:
            numpy.random.Generator backed by Philox at counter zero
        """
        key = np.array([self.seed, (channel << 48) | int(index)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))
    
    # ═══════════════════════════════════════════════════════════════════
    # BROWNIAN PATHS
    # ═══════════════════════════════════════════════════════════════════
    
    def brownian_level(self, level, count):
        """
        Standard normals for one dyadic level of a Brownian path.
        
        Args:
            level: Dyadic level (0 draws the endpoint, L >= 1 the midpoints)
            count: Number of normals at this level
            
        Returns:
            numpy array of shape (count,)
        """
        return self.stream(CHANNEL_BROWNIAN, level).standard_normal(count)
    
    # ═══════════════════════════════════════════════════════════════════
    # SAMPLES
    # ═══════════════════════════════════════════════════════════════════
    
    def sample_generator(self, index):
        """Generator for the index-th random sample of a study"""
        return self.stream(CHANNEL_SAMPLES, index)
