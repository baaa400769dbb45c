from typing import Callable

import numpy as np

from fem_assembly.basis import lagrange_basis
from fem_assembly.quadrature import triangle_rule
from fem_assembly.spaces import MixedSpace


def _field_at_quadrature(coeffs: np.ndarray, space: MixedSpace, points: np.ndarray):
    n = len(coeffs)
    if n == space.n_velocity:
        dofmap = space.velocity_dofs
        nodal = coeffs.reshape(-1, 2)
    elif n == space.n_pressure:
        dofmap = space.pressure_dofs
        nodal = coeffs.reshape(-1, 1)
    else:
        raise ValueError(f"Vector of length {n} matches neither velocity ({space.n_velocity}) "
                         f"nor pressure ({space.n_pressure}) space")
    phi = lagrange_basis(dofmap.degree).values(points)
    local = nodal[dofmap.cell_to_nodes]
    return np.einsum("qi,tic->tqc", phi, local)


def _exact_at(exact: Callable, pts: np.ndarray, components: int) -> np.ndarray:
    raw = exact(pts[..., 0], pts[..., 1])
    if components == 1:
        return np.broadcast_to(np.asarray(raw, dtype=float), pts.shape[:-1])[..., None]
    return np.stack([np.broadcast_to(np.asarray(c, dtype=float), pts.shape[:-1]) for c in raw], axis=-1)


def _relative_error(coeffs: np.ndarray, exact: Callable, space: MixedSpace, power: int) -> float:
    rule = triangle_rule(space.quadrature_degree)
    wdet = rule.weights[None, :] * np.abs(space.geometry.determinants)[:, None]
    approx = _field_at_quadrature(np.asarray(coeffs, dtype=float), space, rule.points)
    reference = _exact_at(exact, space.geometry.map_points(rule.points), approx.shape[-1])
    if power == 2:
        num = np.sum(wdet * np.sum((reference - approx) ** 2, axis=-1))
        den = np.sum(wdet * np.sum(reference ** 2, axis=-1))
        num, den = np.sqrt(num), np.sqrt(den)
    else:
        num = np.sum(wdet * np.sum(np.abs(reference - approx), axis=-1))
        den = np.sum(wdet * np.sum(np.abs(reference), axis=-1))
    if den == 0:
        raise ValueError("Exact field has zero norm; relative error is undefined")
    return float(num / den)


def relative_l2_error(coeffs: np.ndarray, exact: Callable, space: MixedSpace) -> float:
    """||u - u_h||_L2 / ||u||_L2 (поле определяется по длине вектора)."""
    return _relative_error(coeffs, exact, space, 2)


def relative_l1_error(coeffs: np.ndarray, exact: Callable, space: MixedSpace) -> float:
    return _relative_error(coeffs, exact, space, 1)


def mean_value(coeffs: np.ndarray, space: MixedSpace) -> float:
    """Среднее по области скалярного поля давления."""
    rule = triangle_rule(space.quadrature_degree)
    wdet = rule.weights[None, :] * np.abs(space.geometry.determinants)[:, None]
    values = _field_at_quadrature(np.asarray(coeffs, dtype=float), space, rule.points)[..., 0]
    return float(np.sum(wdet * values) / np.sum(wdet))


def discrete_relative_error(coeffs: np.ndarray, reference: np.ndarray, space: MixedSpace, power: int = 1) -> float:
    """Относительная ошибка между двумя конечноэлементными функциями в L1 (power=1) или L2."""
    rule = triangle_rule(space.quadrature_degree)
    wdet = rule.weights[None, :] * np.abs(space.geometry.determinants)[:, None]
    diff = _field_at_quadrature(np.asarray(coeffs, dtype=float) - reference, space, rule.points)
    ref = _field_at_quadrature(np.asarray(reference, dtype=float), space, rule.points)
    if power == 1:
        num = np.sum(wdet * np.sum(np.abs(diff), axis=-1))
        den = np.sum(wdet * np.sum(np.abs(ref), axis=-1))
    else:
        num = np.sqrt(np.sum(wdet * np.sum(diff ** 2, axis=-1)))
        den = np.sqrt(np.sum(wdet * np.sum(ref ** 2, axis=-1)))
    if den == 0:
        raise ValueError("Reference field has zero norm; relative error is undefined")
    return float(num / den)
