"""Regular-grid fields and the discrete operators used by every solver.

Scalar fields are plain ``ndarray`` objects whose shape is the grid extent.
Vector fields carry one leading component axis, ``(ndim, *dims)``.  Unit
spacing is assumed throughout.

The gradient uses forward differences with a zero difference at the trailing
boundary of each axis (Neumann), and the divergence is its exact negative
adjoint, so that ``<grad u, q> == -<u, div q>`` up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

__all__ = [
    "GridGeometry",
    "gradient",
    "divergence",
    "project_ball",
    "pointwise_norm",
    "divide",
    "inner",
    "check_finite",
    "check_same_shape",
]


@dataclass(frozen=True)
class GridGeometry:
    """Extents of a regular grid with unit spacing.

    Parameters
    ----------
    dims : tuple of int
        Extent along each axis.  One to three axes are accepted; the solvers
        are written for any number of axes but file I/O and buffer accounting
        assume 2 or 3.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not 1 <= len(dims) <= 3:
            raise ValueError(f"grid must have 1 to 3 axes, got {len(dims)}")
        if any(n < 1 for n in dims):
            raise ValueError(f"every grid extent must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def voxels(self) -> int:
        return prod(self.dims)

    @classmethod
    def of(cls, field: np.ndarray) -> "GridGeometry":
        return cls(tuple(field.shape))

    def scalar(self, fill: float = 0.0) -> np.ndarray:
        return np.full(self.dims, fill, dtype=float)

    def vector(self) -> np.ndarray:
        return np.zeros((self.ndim,) + self.dims)


def gradient(u: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference gradient with a zero last difference on each axis.

    Parameters
    ----------
    u : ndarray
        Scalar field of shape ``dims``.
    out : ndarray, optional
        Buffer of shape ``(u.ndim, *dims)`` receiving the result.

    Returns
    -------
    ndarray
        Vector field of shape ``(u.ndim, *dims)``.

    Examples
    --------
    >>> gradient(np.array([0.0, 1.0, 0.0]))
    array([[ 1., -1.,  0.]])
    """
    u = np.asarray(u, dtype=float)
    if out is None:
        out = np.empty((u.ndim,) + u.shape)
    for axis in range(u.ndim):
        g = out[axis]
        n = u.shape[axis]
        head = [slice(None)] * u.ndim
        head[axis] = slice(0, n - 1)
        tail = [slice(None)] * u.ndim
        tail[axis] = slice(1, n)
        last = [slice(None)] * u.ndim
        last[axis] = slice(n - 1, n)
        np.subtract(u[tuple(tail)], u[tuple(head)], out=g[tuple(head)])
        g[tuple(last)] = 0.0
    return out


def divergence(q: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Backward-difference divergence, the negative adjoint of `gradient`.

    Along each axis the contribution at index ``i`` is ``q[i] - q[i-1]`` with
    ``q[-1] = 0``.  The last entry of ``q`` along its own axis is ignored,
    matching the zero that `gradient` writes there.

    Examples
    --------
    >>> divergence(np.array([[1.0, -1.0, 0.0]]))
    array([ 1., -2.,  1.])
    """
    q = np.asarray(q, dtype=float)
    ndim = q.shape[0]
    shape = q.shape[1:]
    if len(shape) != ndim:
        raise ValueError(
            f"vector field has {ndim} components but {len(shape)} spatial axes"
        )
    if out is None:
        out = np.zeros(shape)
    else:
        out[...] = 0.0
    for axis in range(ndim):
        qa = q[axis]
        n = shape[axis]
        if n == 1:
            continue
        body = [slice(None)] * ndim
        # i in [0, n-2]: +q_i ; i in [1, n-1]: -q_{i-1}
        body[axis] = slice(0, n - 1)
        shifted = [slice(None)] * ndim
        shifted[axis] = slice(1, n)
        out[tuple(body)] += qa[tuple(body)]
        out[tuple(shifted)] -= qa[tuple(body)]
    return out


def pointwise_norm(q: np.ndarray) -> np.ndarray:
    """Euclidean length of a vector field at every voxel."""
    acc = q[0] * q[0]
    for k in range(1, q.shape[0]):
        acc += q[k] * q[k]
    return np.sqrt(acc)


def project_ball(
    q: np.ndarray, bound, out: np.ndarray | None = None
) -> np.ndarray:
    """Project each voxel's vector onto the ball of radius ``bound``.

    Vectors whose length exceeds the bound are rescaled to lie on the sphere;
    all others are left untouched.  The rescaled vectors are nudged inward by
    at most a few ulps so that their recomputed length never exceeds the
    bound, which makes the projection exactly idempotent.

    Parameters
    ----------
    q : ndarray
        Vector field ``(ndim, *dims)``.
    bound : array_like
        Non-negative radius, broadcastable to ``dims``.
    out : ndarray, optional
        Destination; may be ``q`` itself for an in-place projection.

    Raises
    ------
    ValueError
        If any bound is negative.
    """
    bound = np.asarray(bound, dtype=float)
    if np.any(bound < 0):
        idx = np.argwhere(bound < 0)[0]
        raise ValueError(f"negative projection bound at voxel {tuple(idx)}")
    if out is None:
        out = np.array(q, dtype=float, copy=True)
    elif out is not q:
        out[...] = q
    bound = np.broadcast_to(bound, out.shape[1:])
    norm = pointwise_norm(out)
    over = norm > bound
    if not over.any():
        return out
    scale = np.where(over, bound / np.where(over, norm, 1.0), 1.0)
    out *= scale
    # rounding can leave the rescaled length a hair above the bound
    for _ in range(8):
        norm = pointwise_norm(out)
        still = norm > bound
        if not still.any():
            break
        out[:, still] *= 1.0 - 2.0 * np.finfo(float).eps
    return out


def divide(a: np.ndarray, b: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Pointwise ``a / b`` that refuses zero denominators.

    Raises
    ------
    ZeroDivisionError
        Reporting the first voxel where ``b`` is zero.
    """
    check_same_shape(a, b)
    zero = b == 0
    if zero.any():
        idx = tuple(int(i) for i in np.argwhere(zero)[0])
        raise ZeroDivisionError(f"zero denominator at voxel {idx}")
    return np.divide(a, b, out=out)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete L2 inner product of two equally shaped fields."""
    check_same_shape(a, b)
    return float(np.sum(np.multiply(a, b)))


def check_same_shape(*fields: np.ndarray) -> None:
    shapes = {np.shape(f) for f in fields}
    if len(shapes) > 1:
        raise ValueError(f"field geometries differ: {sorted(shapes)}")


def check_finite(field: np.ndarray, name: str = "field") -> None:
    if not np.all(np.isfinite(field)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(field))[0])
        raise FloatingPointError(f"{name} is not finite at index {idx}")
