"""Next-word query generator served over a line-delimited JSON protocol.

Trains a small encoder-decoder on query-log samples (per-position next-token
pairs, or prefix-to-target-set distributions), extracts contextual term
vectors from passages, and answers generation requests with optional
representation swapping.
"""

__version__ = "0.1.0"
