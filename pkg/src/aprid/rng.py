"""Deterministic random-stream derivation.

Every run expands a single master seed into named, non-overlapping streams
through numpy's ``SeedSequence`` spawning-by-key mechanism:

* training draws (oracle sampling) use ``(seed, TRAIN_TAG)``,
* the evaluation draw at checkpoint ``k`` uses ``(seed, EVAL_TAG, k, lane)``,
* instance freezing (sample-average approximations) uses ``(seed, FREEZE_TAG)``.

Training and evaluation therefore never share a stream, and re-running with
the same master seed reproduces every draw bit for bit.
"""

import numpy as np

__all__ = ["TRAIN_TAG", "EVAL_TAG", "FREEZE_TAG", "stream_seed", "training_rng", "eval_seed", "freeze_seed"]

TRAIN_TAG = 1
EVAL_TAG = 2
FREEZE_TAG = 3


def stream_seed(master_seed, *tags) -> np.random.SeedSequence:
    """SeedSequence for the stream named by ``tags`` under ``master_seed``."""
    entropy = [int(master_seed)] + [int(t) for t in tags]
    if any(e < 0 for e in entropy):
        raise ValueError(f"seeds and tags must be non-negative, got {entropy}")
    return np.random.SeedSequence(entropy)


def training_rng(master_seed) -> np.random.Generator:
    """Generator consumed by a solver's per-iteration oracle draws."""
    return np.random.default_rng(stream_seed(master_seed, TRAIN_TAG))


def eval_seed(master_seed, iteration, lane=0) -> np.random.SeedSequence:
    """Seed for the fresh-sample evaluation at one checkpoint.

    ``lane`` separates multiple evaluations at the same iteration (a solver
    emitting two candidate trajectories evaluates each on its own stream).
    """
    return stream_seed(master_seed, EVAL_TAG, iteration, lane)


def freeze_seed(master_seed) -> np.random.SeedSequence:
    """Seed for drawing a sample-average instance from an expectation problem."""
    return stream_seed(master_seed, FREEZE_TAG)
