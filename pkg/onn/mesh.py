"""
Unitary interferometer meshes.

A mesh of N modes is a rectangular arrangement of N(N-1)/2 Mach-Zehnder
interferometers followed by N output phase shifters. Each MZI has the transfer
matrix B·P(θ)·B·P(φ) with B = (1/√2)[[1, i], [i, 1]] and P(ξ) = diag(e^{iξ}, 1).
Fields propagate column by column, so applying a mesh costs O(N²) per vector.
"""

from functools import lru_cache
import logging
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray

from models import MZIPhases, MeshParams, rectangular_layout

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]


class DimensionMismatchError(ValueError):
    """Raised when a field vector does not match the mesh or network dimension."""


@lru_cache(maxsize=None)
def _column_rows(n: int) -> Tuple[Tuple[int, int, NDArray[np.intp]], ...]:
    """Per column: (start, stop) into the flat MZI arrays and the top rows."""
    columns: List[Tuple[int, int, NDArray[np.intp]]] = []
    start = 0
    layout = rectangular_layout(n)
    for col in range(n):
        rows = np.array([row for c, row in layout if c == col], dtype=np.intp)
        columns.append((start, start + len(rows), rows))
        start += len(rows)
    return tuple(columns)


def _mzi_coefficients(theta, phi) -> Tuple[ComplexArray, ComplexArray, ComplexArray, ComplexArray]:
    """Entries (u00, u01, u10, u11) of B·P(θ)·B·P(φ), vectorized over MZIs."""
    e_theta = np.exp(1j * np.asarray(theta))
    e_phi = np.exp(1j * np.asarray(phi))
    u00 = 0.5 * (e_theta - 1.0) * e_phi
    u01 = 0.5j * (e_theta + 1.0)
    u10 = 0.5j * (e_theta + 1.0) * e_phi
    u11 = 0.5 * (1.0 - e_theta)
    return u00, u01, u10, u11


def mzi_transfer_matrix(p: MZIPhases) -> ComplexArray:
    """
    Compute the 2×2 transfer matrix of one MZI.

    Args:
        p: Phase settings of the MZI

    Returns:
        The unitary matrix B·P(θ)·B·P(φ)
    """
    u00, u01, u10, u11 = _mzi_coefficients(p.theta, p.phi)
    return np.array([[u00, u01], [u10, u11]], dtype=np.complex128)


def _as_field(m: MeshParams, x) -> ComplexArray:
    field = np.asarray(x, dtype=np.complex128)
    if field.ndim == 0 or field.shape[-1] != m.n:
        raise DimensionMismatchError(f"expected fields of dimension {m.n}, got shape {field.shape}")
    return field


def _propagate(n: int, theta, phi, omega, x: ComplexArray) -> ComplexArray:
    u00, u01, u10, u11 = _mzi_coefficients(theta, phi)
    y = x.copy()
    for start, stop, rows in _column_rows(n):
        if stop == start:
            continue
        top = y[..., rows]
        bottom = y[..., rows + 1]
        y[..., rows] = u00[start:stop] * top + u01[start:stop] * bottom
        y[..., rows + 1] = u10[start:stop] * top + u11[start:stop] * bottom
    return y * np.exp(1j * np.asarray(omega))


def mesh_apply(m: MeshParams, x) -> ComplexArray:
    """
    Apply a mesh to one field vector or a batch of them.

    The fields stream through the MZI columns without building the N×N matrix.

    Args:
        m: Mesh parameters
        x: Complex array whose last axis has length N

    Returns:
        The transformed fields, same shape as x

    Raises:
        DimensionMismatchError: If the last axis of x is not N
    """
    field = _as_field(m, x)
    return _propagate(m.n, m.theta, m.phi, m.omega, field)


def mesh_unitary(m: MeshParams) -> ComplexArray:
    """Return the dense N×N unitary implemented by the mesh."""
    # Columns of U are the images of the basis vectors
    return mesh_apply(m, np.eye(m.n, dtype=np.complex128)).T


def mesh_init_random(n: int, seed: int) -> MeshParams:
    """
    Draw every phase of an N-mode mesh uniformly from [0, 2π).

    Args:
        n: Mesh dimension
        seed: Seed of the generator; equal seeds give identical meshes

    Returns:
        Randomly initialized mesh parameters
    """
    if n < 1:
        raise ValueError(f"mesh dimension must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    count = n * (n - 1) // 2
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    omega = rng.uniform(0.0, 2.0 * np.pi, size=n)
    logger.debug("drew %d MZIs and %d output phases for N=%d with seed %d", count, n, n, seed)
    return MeshParams.from_arrays(n, theta, phi, omega)


def mesh_backward(
    m: MeshParams, y: ComplexArray, delta_y: ComplexArray
) -> Tuple[ComplexArray, NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """
    Propagate a cotangent backward through a mesh.

    Cotangents are packed as δ = ∂L/∂Re(y) + i·∂L/∂Im(y), so a real parameter p
    receives Re(Σ conj(δ)·∂y/∂p). The mesh is unitary, so the intermediate fields
    are recovered by running the output y backward through U†; nothing from the
    forward pass besides y is needed.

    Args:
        m: Mesh parameters used in the forward pass
        y: Mesh output fields, shape (..., N)
        delta_y: Cotangent of the loss with respect to y, same shape

    Returns:
        Tuple of (cotangent with respect to the mesh input, ∂L/∂θ, ∂L/∂φ,
        ∂L/∂output_phases), parameter gradients summed over the batch
    """
    y = _as_field(m, y)
    delta = _as_field(m, delta_y)
    batch_axes = tuple(range(y.ndim - 1))

    grad_omega = np.sum(np.real(np.conj(delta) * 1j * y), axis=batch_axes)
    phase = np.exp(-1j * m.omega)
    field = y * phase
    delta = delta * phase

    u00, u01, u10, u11 = _mzi_coefficients(m.theta, m.phi)
    e_theta = np.exp(1j * m.theta)
    e_phi = np.exp(1j * m.phi)
    grad_theta = np.zeros_like(m.theta)
    grad_phi = np.zeros_like(m.phi)

    for start, stop, rows in reversed(_column_rows(m.n)):
        if stop == start:
            continue
        s = slice(start, stop)
        out_top, out_bottom = field[..., rows], field[..., rows + 1]
        d_top, d_bottom = delta[..., rows], delta[..., rows + 1]

        # Invert the column with U†
        in_top = np.conj(u00[s]) * out_top + np.conj(u10[s]) * out_bottom
        in_bottom = np.conj(u01[s]) * out_top + np.conj(u11[s]) * out_bottom

        # dU/dθ = (i·e^{iθ}/2)·[[e^{iφ}, i], [i·e^{iφ}, -1]]
        k = 0.5j * e_theta[s]
        dtop_dtheta = k * (e_phi[s] * in_top + 1j * in_bottom)
        dbottom_dtheta = k * (1j * e_phi[s] * in_top - in_bottom)
        grad_theta[s] = np.sum(
            np.real(np.conj(d_top) * dtop_dtheta + np.conj(d_bottom) * dbottom_dtheta), axis=batch_axes
        )

        # dU/dφ scales the first column by i
        grad_phi[s] = np.sum(
            np.real(np.conj(d_top) * 1j * u00[s] * in_top + np.conj(d_bottom) * 1j * u10[s] * in_top),
            axis=batch_axes,
        )

        field[..., rows] = in_top
        field[..., rows + 1] = in_bottom
        delta[..., rows] = np.conj(u00[s]) * d_top + np.conj(u10[s]) * d_bottom
        delta[..., rows + 1] = np.conj(u01[s]) * d_top + np.conj(u11[s]) * d_bottom

    return delta, grad_theta, grad_phi, grad_omega
