# ls_sparsify/setup_cache.py
"""
Reuse of preconditioner setups across solves in one session.

A setup (grid, medium, weights, stencils, factorization) depends only on the
configuration fields listed in SETUP_FIELDS; the incident direction, the
source position, GMRES options and output options can change between solves
without rebuilding it.
"""
from __future__ import annotations

import hashlib
import logging

logger = logging.getLogger(__name__)

# setups kept per session; the least recently used one is dropped first
MAX_SETUPS = 4

SETUP_FIELDS = (
    "kind", "dim", "omega", "grid_n", "shape", "radius", "mask",
    "medium_name", "depth", "sigma", "outer", "wall", "smoothing", "smoothing_length", "eta", "buffer_b",
    "stencil_mode", "sketch_r", "seed", "leaf_size",
)


def setup_key(config):
    """Fingerprint of every config field that influences the preconditioner."""
    parts = []
    for name in SETUP_FIELDS:
        value = getattr(config, name)
        if name == "omega" and config.kind == "laplace":
            value = None
        if name == "eta" and config.kind == "helmholtz":
            value = None
        parts.append(f"{name}={value!r}")
    return hashlib.sha1(";".join(parts).encode("utf-8")).hexdigest()[:16]


def store_setup(session, key, setup):
    setups = session.setups
    setups[key] = setup
    setups.move_to_end(key)
    while len(setups) > session.max_setups:
        evicted, _ = setups.popitem(last=False)
        logger.info("evicted setup %s (limit %d)", evicted, session.max_setups)
    logger.debug("stored setup %s (%d cached)", key, len(setups))
    return key


def lookup_setup(session, key):
    """Cached setup for `key`, or None. A hit marks the setup as most recently used."""
    setup = session.setups.get(key)
    if setup is not None:
        session.setups.move_to_end(key)
        logger.info("reusing setup %s", key)
    return setup


def drop_setups(session):
    count = len(session.setups)
    session.setups.clear()
    return f"✓ Dropped {count} cached setup(s)."
