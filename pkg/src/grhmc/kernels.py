"""Momentum kernels applied when a trajectory hits a region boundary.

Gradient-jump boundaries only switch the active gradient field.  Density-jump
boundaries refract (energy-conserving change of the normal momentum) when the
normal kinetic energy suffices and reflect otherwise.  Hard walls always
reflect.  Reflections are either deterministic mirror images or the
randomized variant that redraws the tangential momentum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoundaryType
from .errors import ContractViolation, DegenerateBoundary

KERNEL_CHOICES = ("deterministic", "randomized", "randomized-sparse")

SWITCH = "switch"
REFRACTION = "refraction"
REFLECTION = "reflection"
WALL = "wall"
GRAZE = "graze"


@dataclass(frozen=True)
class BoundaryGeometry:
    """Local boundary data at an event point.

    ``n_hat`` is the unit normal in standardized coordinates pointing to the
    higher-density side, ``delta_u >= 0`` the log-density gap across the
    boundary (0 for gradient jumps, inf for hard walls).  ``k_lo`` and
    ``k_hi`` are the side patterns of the low- and high-density neighbours.
    """

    n_hat: np.ndarray
    delta_u: float
    k_lo: np.ndarray
    k_hi: np.ndarray
    constraint: int = -1
    boundary_type: BoundaryType = BoundaryType.DENSITY_JUMP


def _with_side(side, k, value):
    out = np.array(side, dtype=bool)
    out[k] = value
    return out


def boundary_geometry(state, k, model, std):
    """Normal, orientation and log-density gap of constraint ``k`` at ``state``.

    Raises
    ------
    DegenerateBoundary
        If the constraint gradient vanishes at the event point.
    """
    q = std.to_model(state.qbar)
    gc = np.asarray(model.constraint_gradient(q, k), dtype=float)
    if np.linalg.norm(gc) < 1e-14:
        raise DegenerateBoundary(f"constraint {k} has a vanishing gradient at {q}")
    n = std.s * gc
    n_hat = n / np.linalg.norm(n)
    plus = _with_side(state.region, k, True)
    minus = _with_side(state.region, k, False)
    btype = model.boundary_types[k]
    if btype is BoundaryType.GRADIENT_JUMP:
        return BoundaryGeometry(n_hat, 0.0, minus, plus, k, btype)
    if btype is BoundaryType.HARD_WALL:
        return BoundaryGeometry(n_hat, math.inf, minus, plus, k, btype)
    lp_plus = float(model.log_density(q, plus))
    lp_minus = float(model.log_density(q, minus))
    if lp_plus >= lp_minus:
        return BoundaryGeometry(n_hat, lp_plus - lp_minus, minus, plus, k, btype)
    return BoundaryGeometry(-n_hat, lp_minus - lp_plus, plus, minus, k, btype)


def gradient_switch(state, k, model=None):
    """Flip the side of constraint ``k``; position and momentum are untouched."""
    if model is not None and model.boundary_types[k] is not BoundaryType.GRADIENT_JUMP:
        raise ContractViolation(f"constraint {k} is not a gradient-jump boundary")
    out = state.copy()
    out.region[k] = not out.region[k]
    return out


def transition_case(pn, delta_u):
    """'A' (refract into high density), 'B' (refract out) or 'C' (reflect)."""
    if pn > 0:
        return "A"
    if pn * pn > 2.0 * delta_u:
        return "B"
    return "C"


def deterministic_transition(pbar, geom):
    """Refraction or mirror reflection of ``pbar`` across ``geom.n_hat``."""
    p = np.asarray(pbar, dtype=float)
    n = geom.n_hat
    pn = float(p @ n)
    case = transition_case(pn, geom.delta_u)
    if case == "A":
        return p + (math.sqrt(pn * pn + 2.0 * geom.delta_u) - pn) * n
    if case == "B":
        return p + (-math.sqrt(pn * pn - 2.0 * geom.delta_u) - pn) * n
    return p - 2.0 * pn * n


def randomized_reflection(pbar, geom, rng=None, sparse=False, x=None):
    """Reflection ``x - ((p + x) . n) n`` with Gaussian ``x``.

    The normal component is flipped exactly; the tangential part is a fresh
    standard normal.  With ``sparse=True`` only coordinates where the normal is
    nonzero are redrawn, the rest keep their momentum.  ``x`` may be supplied
    instead of drawing it from ``rng``.
    """
    p = np.asarray(pbar, dtype=float)
    n = geom.n_hat
    if x is None:
        if sparse:
            nz = n != 0
            x = p.copy()
            x[nz] = rng.standard_normal(int(nz.sum()))
        else:
            x = rng.standard_normal(p.size)
    else:
        x = np.asarray(x, dtype=float)
        if sparse:
            nz = n != 0
            x = np.where(nz, x, p)
    return x - float((p + x) @ n) * n


def _reflect(p, geom, kernel_choice, rng):
    if kernel_choice == "deterministic":
        return p - 2.0 * float(p @ geom.n_hat) * geom.n_hat
    return randomized_reflection(p, geom, rng, sparse=kernel_choice == "randomized-sparse")


def apply_boundary(state, k, model, std, kernel_choice="randomized", rng=None):
    """Dispatch the boundary behaviour for constraint ``k``.

    Returns
    -------
    (PhasePoint, str)
        The post-event state and the outcome label (``switch``, ``refraction``,
        ``reflection``, ``wall`` or ``graze`` when the momentum turned out not
        to point across the boundary).
    """
    if kernel_choice not in KERNEL_CHOICES:
        raise ContractViolation(f"unknown kernel choice {kernel_choice!r}")
    btype = model.boundary_types[k]
    if btype is BoundaryType.GRADIENT_JUMP:
        return gradient_switch(state, k), SWITCH

    geom = boundary_geometry(state, k, model, std)
    p = state.pbar
    pn = float(p @ geom.n_hat)
    in_hi = bool(state.region[k]) == bool(geom.k_hi[k])
    if btype is BoundaryType.HARD_WALL:
        if pn >= 0:
            return state.copy(), GRAZE
        out = state.copy()
        out.pbar = _reflect(p, geom, kernel_choice, rng)
        return out, WALL

    # a crossing must point out of the current region
    if (in_hi and pn >= 0) or (not in_hi and pn <= 0):
        return state.copy(), GRAZE
    out = state.copy()
    case = transition_case(pn, geom.delta_u)
    if case == "C":
        out.pbar = _reflect(p, geom, kernel_choice, rng)
        return out, REFLECTION
    out.pbar = deterministic_transition(p, geom)
    out.region[k] = not out.region[k]
    return out, REFRACTION
