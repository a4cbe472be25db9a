"""Euler-Bernoulli beam finite elements with per-element stiffness reduction.

Each node carries two DOFs, transverse displacement ``v`` (positive in the
load direction) and slope ``theta``, ordered ``(v1, theta1, v2, theta2, ...)``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidGeometry, UnsupportedCase
from .linalg import lu_solve


class Support(str, Enum):
    CANTILEVER = "cantilever"
    SIMPLY_SUPPORTED = "simply_supported"


@dataclass(frozen=True)
class BeamSpec:
    """Geometry, material, mesh, load and support of a prismatic beam.

    ``load_node`` is 1-based; ``None`` means the last node (the tip).
    """

    length_m: float = 0.2
    width_m: float = 0.02
    height_m: float = 0.01
    youngs_modulus_pa: float = 200e9
    n_elements: int = 8
    load_newton: float = 100.0
    load_node: int | None = None
    support: Support = Support.CANTILEVER

    def __post_init__(self):
        object.__setattr__(self, "support", Support(self.support))
        if self.load_node is None:
            object.__setattr__(self, "load_node", self.n_elements + 1)
        for name in ("length_m", "width_m", "height_m", "youngs_modulus_pa"):
            if not getattr(self, name) > 0:
                raise InvalidGeometry(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise InvalidGeometry(f"n_elements must be a positive integer, got {self.n_elements}")
        if not 1 <= self.load_node <= self.n_elements + 1:
            raise InvalidGeometry(
                f"load_node {self.load_node} outside 1..{self.n_elements + 1}")

    @property
    def n_nodes(self):
        return self.n_elements + 1

    @property
    def n_dofs(self):
        return 2 * self.n_nodes

    @property
    def second_moment(self):
        return self.width_m * self.height_m ** 3 / 12.0

    @property
    def flexural_rigidity(self):
        return self.youngs_modulus_pa * self.second_moment

    @property
    def element_length(self):
        return self.length_m / self.n_elements

    def node_positions(self):
        return np.linspace(0.0, self.length_m, self.n_nodes)


@dataclass(frozen=True)
class StaticResponse:
    displacements_m: np.ndarray
    rotations_rad: np.ndarray
    strains: np.ndarray


def _factors(scenario, n_elements):
    factors = np.asarray(getattr(scenario, "factors", scenario), dtype=float)
    if factors.shape != (n_elements,):
        raise DimensionMismatch(
            f"expected {n_elements} stiffness factors, got shape {factors.shape}")
    return factors


def element_stiffness(ei, length):
    """Hermite-cubic bending stiffness, DOF order (v1, theta1, v2, theta2)."""
    if not ei > 0 or not length > 0:
        raise InvalidGeometry(f"need ei > 0 and length > 0, got ei={ei}, length={length}")
    L = length
    k = np.array([
        [12.0, 6 * L, -12.0, 6 * L],
        [6 * L, 4 * L * L, -6 * L, 2 * L * L],
        [-12.0, -6 * L, 12.0, -6 * L],
        [6 * L, 2 * L * L, -6 * L, 4 * L * L],
    ])
    return (ei / L ** 3) * k


def assemble_global(spec, scenario=None):
    """Global stiffness with element ``e`` scaled by its reduction factor."""
    if scenario is None:
        factors = np.ones(spec.n_elements)
    else:
        factors = _factors(scenario, spec.n_elements)
    ke = element_stiffness(spec.flexural_rigidity, spec.element_length)
    k = np.zeros((spec.n_dofs, spec.n_dofs))
    for e, ee in enumerate(factors):
        dofs = slice(2 * e, 2 * e + 4)
        k[dofs, dofs] += ee * ke
    return k


def load_vector(spec):
    f = np.zeros(spec.n_dofs)
    f[2 * (spec.load_node - 1)] = spec.load_newton
    return f


def constrained_dofs(spec):
    if spec.support is Support.CANTILEVER:
        return [0, 1]
    return [0, 2 * spec.n_elements]


def apply_boundary_conditions(k, f, spec):
    """Drop constrained rows/columns; returns ``(k_red, f_red, retained)``."""
    k = np.asarray(k, dtype=float)
    f = np.asarray(f, dtype=float)
    if k.shape != (spec.n_dofs, spec.n_dofs) or f.shape != (spec.n_dofs,):
        raise DimensionMismatch(
            f"expected {spec.n_dofs}-DOF system, got k{k.shape} f{f.shape}")
    fixed = set(constrained_dofs(spec))
    retained = [i for i in range(spec.n_dofs) if i not in fixed]
    idx = np.array(retained)
    return k[np.ix_(idx, idx)], f[idx], retained


def nodal_strain(spec, displacements, rotations):
    """Extreme-fiber bending strain at every node.

    Node ``i`` takes the curvature at the left end of element ``i``; the last
    node uses the right end of the last element. The reported fiber is the
    one in tension when ``v`` curves toward the load, so a downward tip load
    on a cantilever gives positive strains.
    """
    v = np.asarray(displacements, dtype=float)
    t = np.asarray(rotations, dtype=float)
    if v.shape != (spec.n_nodes,) or t.shape != (spec.n_nodes,):
        raise DimensionMismatch(f"expected {spec.n_nodes} nodal values")
    L = spec.element_length
    v1, t1, v2, t2 = v[:-1], t[:-1], v[1:], t[1:]
    curv = np.empty(spec.n_nodes)
    curv[:-1] = (-6 / L ** 2) * v1 + (-4 / L) * t1 + (6 / L ** 2) * v2 + (-2 / L) * t2
    curv[-1] = (6 / L ** 2) * v1[-1] + (2 / L) * t1[-1] + (-6 / L ** 2) * v2[-1] + (4 / L) * t2[-1]
    return 0.5 * spec.height_m * curv


def solve_static(spec, scenario=None):
    k = assemble_global(spec, scenario)
    k_red, f_red, retained = apply_boundary_conditions(k, load_vector(spec), spec)
    d = np.zeros(spec.n_dofs)
    d[retained] = lu_solve(k_red, f_red)
    v, t = d[0::2], d[1::2]
    return StaticResponse(v, t, nodal_strain(spec, v, t))


def exact_cantilever_response(spec):
    """Closed-form response of an undamaged tip-loaded cantilever."""
    if spec.support is not Support.CANTILEVER or spec.load_node != spec.n_nodes:
        raise UnsupportedCase("exact solution covers only the tip-loaded cantilever")
    x = spec.node_positions()
    P, L, EI = spec.load_newton, spec.length_m, spec.flexural_rigidity
    v = P * x ** 2 * (3 * L - x) / (6 * EI)
    theta = P * x * (2 * L - x) / (2 * EI)
    strain = P * (L - x) * (0.5 * spec.height_m) / EI
    return StaticResponse(v, theta, strain)
