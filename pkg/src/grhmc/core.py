"""Phase-space types, the standardization map and the target-model contract.

Positions live in two coordinate systems: the model's own coordinates ``q``
and standardized coordinates ``qbar`` related by ``q = m + s * qbar`` with a
diagonal positive scale ``s``.  All dynamics run in standardized coordinates.

A *region* is identified by its side pattern: one boolean per constraint,
``True`` where ``c_k(q) >= 0``.  This keeps models with many constraints
(hundreds of ReLU hyperplanes) cheap to track; :func:`region_index` maps a
pattern to a 1-based integer index for small models.
"""

from __future__ import annotations

import abc
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InitializationError, NonFiniteError


class BoundaryType(enum.Enum):
    GRADIENT_JUMP = "gradient-jump"
    DENSITY_JUMP = "density-jump"
    HARD_WALL = "hard-wall"


@dataclass(frozen=True)
class Standardizer:
    """Diagonal affine map ``q = m + s * qbar``."""

    m: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(-1)
        s = np.array(self.s, dtype=float).reshape(-1)
        if m.shape != s.shape:
            raise ContractViolation(
                f"center has {m.size} entries but scale has {s.size}")
        if not np.all(s > 0) or not np.all(np.isfinite(s)):
            raise ContractViolation("scale entries must be finite and strictly positive")
        m.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "s", s)

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self):
        return self.m.size

    def to_standard(self, q):
        return (np.asarray(q, dtype=float) - self.m) / self.s

    def to_model(self, qbar):
        return self.m + self.s * np.asarray(qbar, dtype=float)


def _check_dim(x, std):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != std.dim:
        raise ContractViolation(
            f"vector of length {x.shape[-1]} does not match standardizer dimension {std.dim}")
    return x


def standardize(q, std):
    """Map model coordinates to standardized coordinates."""
    return std.to_standard(_check_dim(q, std))


def unstandardize(qbar, std):
    """Map standardized coordinates back to model coordinates."""
    return std.to_model(_check_dim(qbar, std))


@dataclass
class PhasePoint:
    """State of the process: time, standardized position and momentum, region."""

    t: float
    qbar: np.ndarray
    pbar: np.ndarray
    region: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def copy(self):
        return PhasePoint(self.t, self.qbar.copy(), self.pbar.copy(), self.region.copy())


@dataclass(frozen=True)
class HamiltonianValue:
    potential: float
    kinetic: float

    @property
    def total(self):
        return self.potential + self.kinetic


def safe_exp(x):
    """``exp(x)`` that returns ``inf`` instead of raising on overflow.

    Trial Runge-Kutta stages can wander far from the typical set; an infinite
    derivative makes the step controller reject and shrink the step.
    """
    return math.exp(x) if x < 700.0 else math.inf


def region_index(side):
    """1-based integer index of a side pattern (binary encoding, constraint 0 is the low bit)."""
    side = np.asarray(side, dtype=bool)
    return 1 + int(sum(1 << k for k, v in enumerate(side) if v))


class TargetModel(abc.ABC):
    """Contract for piecewise-defined targets.

    Subclasses set ``dim`` and ``boundary_types`` (one entry per constraint) and
    implement the four abstract methods.  ``log_density`` and ``gradient`` take
    the side pattern explicitly: they must evaluate the *region's* smooth formula
    even when ``q`` lies slightly outside that region, because integration
    stages within a step may overshoot the boundary.
    """

    dim: int
    boundary_types: tuple = ()
    h_max_hint = None

    @property
    def n_constraints(self):
        return len(self.boundary_types)

    @property
    def region_count(self):
        n_free = sum(b is not BoundaryType.HARD_WALL for b in self.boundary_types)
        return 2 ** n_free

    @abc.abstractmethod
    def log_density(self, q, side):
        """Log density kernel of region ``side`` at ``q``."""

    @abc.abstractmethod
    def gradient(self, q, side):
        """Gradient of :meth:`log_density` with respect to ``q``."""

    def constraints(self, q):
        """Constraint values, shape ``q.shape[:-1] + (n_constraints,)``."""
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape[:-1] + (0,))

    def constraint_gradient(self, q, k):
        raise ContractViolation(f"model has no constraint {k}")

    def classify(self, q):
        """Side pattern of ``q``; exact zeros count as the non-negative side."""
        return np.asarray(self.constraints(q)) >= 0

    def admissible(self, side):
        """False if ``side`` lies beyond a hard wall."""
        for k, b in enumerate(self.boundary_types):
            if b is BoundaryType.HARD_WALL and not side[k]:
                return False
        return True

    def initial_point(self, rng):
        """Optional model-specific starting position (model coordinates)."""
        return None


def hamiltonian(state, model, std):
    """Potential, kinetic and total energy of ``state``."""
    q = std.to_model(state.qbar)
    lp = model.log_density(q, state.region)
    if not np.isfinite(lp):
        raise NonFiniteError(f"non-finite log density {lp!r}", position=q)
    pbar = np.asarray(state.pbar, dtype=float)
    return HamiltonianValue(potential=-float(lp), kinetic=0.5 * float(pbar @ pbar))


def rhs(state, model, std):
    """Time derivative of ``(qbar, pbar)`` under the region's Hamiltonian flow."""
    q = std.to_model(state.qbar)
    g = np.asarray(model.gradient(q, state.region), dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite log-density gradient", position=q)
    return np.concatenate([state.pbar, std.s * g])


def region_field(model, std, side):
    """Derivative field ``f(t, y)`` on the stacked vector ``y = (qbar, pbar)`` for a frozen region."""
    d = std.dim
    m, s = std.m, std.s
    grad = model.gradient

    def field(t, y):
        out = np.empty(2 * d)
        out[:d] = y[d:]
        out[d:] = s * grad(m + s * y[:d], side)
        return out

    return field


def initial_state(model, std, rng, q0=None):
    """Draw a starting phase point: ``qbar ~ N(0, I)`` unless ``q0`` or the model supplies one."""
    d = model.dim
    if q0 is None:
        q0 = model.initial_point(rng)
    if q0 is None:
        qbar = rng.standard_normal(d)
    else:
        qbar = std.to_standard(np.asarray(q0, dtype=float))
    c = np.atleast_1d(model.constraints(std.to_model(qbar)))
    if c.size and np.any(c == 0.0):
        # measure-zero start on a boundary
        qbar = qbar + 1e-8 * rng.standard_normal(d)
    q = std.to_model(qbar)
    side = model.classify(q)
    if not model.admissible(side):
        raise InitializationError("initial position lies outside a hard wall")
    lp = model.log_density(q, side)
    if not np.isfinite(lp):
        raise InitializationError(f"initial position has log density {lp!r}")
    pbar = rng.standard_normal(d)
    return PhasePoint(0.0, qbar, pbar, np.asarray(side, dtype=bool))
