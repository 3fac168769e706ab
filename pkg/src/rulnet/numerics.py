"""Deterministic numerical substrate: float64 arrays, seeded RNG, init and Adam.

Dense linear algebra is numpy (row-major float64).  Every sum over a batch of
sequences is accumulated sequentially in index order by the callers, so a run
is bit-reproducible for a given seed on a given machine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

DTYPE = np.float64

Params = Dict[str, np.ndarray]


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up in a tensor that must stay finite."""


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name!r}")
    return arr


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``data`` to a C-contiguous float64 2-D array, validating shape."""
    arr = np.ascontiguousarray(data, dtype=DTYPE)
    if arr.ndim == 1 and rows is not None and cols is not None:
        if arr.size != rows * cols:
            raise ValueError(f"data length {arr.size} != {rows}x{cols}")
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"expected {cols} cols, got {arr.shape[1]}")
    return check_finite("matrix", arr)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    return check_finite("matmul", a @ b)


def seeded_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded through numpy's SeedSequence.

    PCG64 output is specified bit-for-bit by numpy and identical across
    platforms for a fixed seed.
    """
    return np.random.Generator(np.random.PCG64(seed))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...] | None = None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: Params = field(default_factory=dict)
    second_moment: Params = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **kwargs,
        )


def adam_step(params: Params, grads: Mapping[str, np.ndarray], state: AdamState,
              learning_rate: float) -> tuple[Params, AdamState]:
    """Bias-corrected Adam update.  Mutates and returns ``params`` and ``state``."""
    if set(grads) != set(params):
        raise KeyError(f"gradient names {sorted(set(grads) ^ set(params))} do not match params")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient {name!r} has shape {g.shape}, param {params[name].shape}")
        check_finite(f"gradient {name}", g)

    state.step_count += 1
    t = state.step_count
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for name in params:
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / corr1
        v_hat = v / corr2
        params[name] -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return params, state
