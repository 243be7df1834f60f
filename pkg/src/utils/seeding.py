"""Seed derivation and content fingerprints."""

import hashlib
import json
from typing import Any

import numpy as np


def derive_seed(master: int, *labels: object) -> int:
    """
    Derive a stage seed from the master seed by labelled hashing.

    The same (master, labels) always gives the same 64-bit seed, so any stage can be
    re-run on its own without replaying the random draws of earlier stages.
    """
    text = ":".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(master: int, *labels: object) -> np.random.Generator:
    """Random generator for a labelled stage."""
    return np.random.default_rng(derive_seed(master, *labels))


def canonical_json(obj: Any) -> str:
    """Key-sorted compact JSON used for hashing and stable file output."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def fingerprint(obj: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
