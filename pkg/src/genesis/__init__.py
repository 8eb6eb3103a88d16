"""Deterministic transformation-pair engine for self-supervised restoration.

Samples patches from unlabeled volumes, distorts them through composable
intensity/shuffle/painting transformations, and emits replayable
(original, distorted) pairs plus a tiny trainable restorer to verify that
the restoration task is learnable and transfers.
"""

__version__ = "0.1.0"
