"""Declared bound curves used by the harness and the acceptance suite.

Every inequality the test suite enforces is pinned here rather than
buried in test code: message budgets for scheme runs, label-size growth
constants, and external-memory curves per port model.
"""

from __future__ import annotations


def log2c(n: int) -> int:
    """Ceiling log2, at least 1."""
    return max(1, (max(n, 2) - 1).bit_length())


def marker_message_budget(m: int) -> int:
    """Per-invocation marker budget for an m-member scope."""
    return 2 * m


def finite_run_message_budget(quota: int, levels: int, mc_pi: int) -> int:
    """Hard cap on protocol messages of one finite-scheme run:
    five marker budgets per level per quota unit."""
    return 5 * levels * quota * mc_pi


# Multiplier applied to levels * static-label budget when checking the
# maximum dynamic label size of a run.
LABEL_OVERHEAD_PER_LEVEL = 24
LABEL_RATIO_CONSTANT = 6.0


def dynamic_label_budget(ls_pi_bits: int, levels: int) -> int:
    return (levels + 1) * (ls_pi_bits + LABEL_OVERHEAD_PER_LEVEL)


# External-memory curves.  A node stores per-level counters plus at most
# two backup copies of sibling memories, hence the constant factors.
MEM_DESIGNER_FACTOR = 4
MEM_ADVERSARY_FACTOR = 4


def designer_memory_budget(n: int, levels: int) -> int:
    return MEM_DESIGNER_FACTOR * (levels + 2) * (2 * log2c(n) + 16)


def adversary_memory_budget(n: int, levels: int, port_cap: int) -> int:
    tau_bits = max(1, port_cap.bit_length())
    return MEM_ADVERSARY_FACTOR * (levels + 2) * (2 * log2c(n) + 2 * tau_bits + 16)
