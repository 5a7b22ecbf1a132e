from typing import Callable, NamedTuple, Union

import numpy as np

from ouqsd.core.exceptions import AccuracyError, DomainError
from ouqsd.schemas.params import QuadratureSpec

Integrand = Callable[[np.ndarray], np.ndarray]
Value = Union[float, np.ndarray]

INITIAL_PANELS = 16

# panel nodes as fractions of the width
_NODES = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
# nodes added when a panel is halved, as fractions of the parent width
_CHILD_NODES = np.array([0.125, 0.375, 0.625, 0.875])


class QuadratureResult(NamedTuple):
    value: Value
    error: Value


def _evaluate(fn: Integrand, x: np.ndarray) -> np.ndarray:
    values = np.asarray(fn(x), dtype=float)
    if values.shape[0] != x.shape[0]:
        raise DomainError("integrand must return one row per abscissa")
    if not np.all(np.isfinite(values)):
        raise DomainError("integrand is not finite on the integration range")
    return values


def _estimates(width: np.ndarray, f: np.ndarray):
    """Coarse and fine Simpson sums per panel; f has shape (n, 5, ...)"""
    w = width.reshape((-1,) + (1,) * (f.ndim - 2))
    coarse = w * (f[:, 0] + 4.0 * f[:, 2] + f[:, 4]) / 6.0
    fine = 0.5 * w * (f[:, 0] + 4.0 * f[:, 1] + 2.0 * f[:, 2] + 4.0 * f[:, 3] + f[:, 4]) / 6.0
    return coarse, fine


def integrate_adaptive(
    fn: Integrand,
    lo: float,
    hi: float,
    spec: QuadratureSpec,
    initial_panels: int = INITIAL_PANELS,
) -> QuadratureResult:
    """Integrate fn over [lo, hi] to absolute tolerance spec.abs_tol.

    fn maps n abscissae to shape (n,) or (n, k). A panel is split while its
    Richardson error exceeds abs_tol * width / (hi - lo).
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise DomainError(f"integration range [{lo}, {hi}] is empty or not finite")

    span = hi - lo
    edges = np.linspace(lo, hi, initial_panels + 1)
    left = edges[:-1]
    width = np.diff(edges)
    depth = np.zeros(initial_panels, dtype=int)
    x = (left[:, None] + width[:, None] * _NODES[None, :]).ravel()
    values = _evaluate(fn, x)
    f = values.reshape((initial_panels, 5) + values.shape[1:])

    done_value = np.zeros(values.shape[1:])
    done_error = np.zeros(values.shape[1:])

    while True:
        coarse, fine = _estimates(width, f)
        delta = (fine - coarse) / 15.0
        err = np.abs(delta)
        worst = err.reshape(err.shape[0], -1).max(axis=1)
        need = worst > spec.abs_tol * width / span

        settled = ~need
        done_value = done_value + (fine[settled] + delta[settled]).sum(axis=0)
        done_error = done_error + err[settled].sum(axis=0)

        if not need.any():
            break
        if np.any(depth[need] >= spec.max_depth):
            estimate = done_value + (fine[need] + delta[need]).sum(axis=0)
            error = done_error + err[need].sum(axis=0)
            raise AccuracyError(
                f"tolerance {spec.abs_tol:g} not met at depth {spec.max_depth}",
                estimate=_scalar(estimate),
                error=_scalar(error),
            )

        left, width, depth, f = left[need], width[need], depth[need], f[need]
        new_x = (left[:, None] + width[:, None] * _CHILD_NODES[None, :]).ravel()
        new_f = _evaluate(fn, new_x).reshape((left.shape[0], 4) + f.shape[2:])

        half = 0.5 * width
        left_child = np.stack(
            [f[:, 0], new_f[:, 0], f[:, 1], new_f[:, 1], f[:, 2]], axis=1
        )
        right_child = np.stack(
            [f[:, 2], new_f[:, 2], f[:, 3], new_f[:, 3], f[:, 4]], axis=1
        )
        f = np.concatenate([left_child, right_child])
        left = np.concatenate([left, left + half])
        width = np.concatenate([half, half])
        depth = np.concatenate([depth + 1, depth + 1])

    return QuadratureResult(_scalar(done_value), _scalar(done_error))


def _scalar(value: np.ndarray) -> Value:
    return float(value) if np.ndim(value) == 0 else value
