"""Force fields, static potentials and the named built-ins.

A :class:`ForceField` holds one callable per configuration component.  Each
callable receives ``(r, v)``, two sequences of d broadcastable arrays, and
returns the force component (mass times acceleration).  Potentials are
static: ``phi(r)`` is a scalar and ``A`` is a sequence of d callables of
``r``.

Derivatives of potentials are taken by complex-step differentiation of the
callables instead of spectrally.  Typical potentials (quadratic wells, the
symmetric gauge of a uniform field) are not periodic on the grid box, so a
spectral derivative would ring at the boundary.  Non-smooth callables are
detected by comparing with a central difference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ForceError

_COMPLEX_STEP = 1e-30
_CENTRAL_STEP = 1e-5
_SMOOTHNESS_TOL = 1e-6
#: Largest growth of scaled second differences, under halving of the grid
#: spacing, accepted from a smooth potential.
SMOOTHNESS_GROWTH = 1.5


def _broadcast_like(value, ref_shape):
    value = np.asarray(value)
    # complex inputs come from complex-step differentiation and must stay complex
    dtype = np.complex128 if np.iscomplexobj(value) else float
    return np.broadcast_to(value.astype(dtype, copy=False), ref_shape)


def _common_shape(arrays):
    return np.broadcast_shapes(*(np.shape(a) for a in arrays))


#: Number of points at which the central-difference cross-check is evaluated.
_CHECK_POINTS = 4096


def partial_derivative(func, args: Sequence, index: int, check: bool = True) -> np.ndarray:
    """d func / d args[index] by complex step.

    With ``check`` the result is compared with a central difference on an
    evenly strided subsample of at most ``_CHECK_POINTS`` points; a mismatch
    means the function is not smooth there and raises :class:`ForceError`.
    Functions that cannot take complex input fall back to central
    differences on the full array.
    """
    args = [np.asarray(a) for a in args]
    args = [a if a.dtype.kind in "fc" else a.astype(float) for a in args]
    shifted = list(args)
    shifted[index] = args[index] + 1j * _COMPLEX_STEP
    try:
        value = np.asarray(func(*shifted))
        deriv = np.imag(value) / _COMPLEX_STEP if np.iscomplexobj(value) else None
    except (TypeError, ValueError):
        deriv = None
    if deriv is not None and not np.all(np.isfinite(deriv)):
        deriv = None
    if deriv is not None and not check:
        return deriv
    shape = _common_shape(args)
    if deriv is None:
        return _central(func, [np.broadcast_to(a, shape) for a in args], index)
    size = int(np.prod(shape, dtype=np.int64))
    pick = np.unique(np.linspace(0, size - 1, min(size, _CHECK_POINTS)).astype(np.int64))
    where = np.unravel_index(pick, shape) if shape else ()
    sub = [np.broadcast_to(a, shape)[where].real for a in args]
    central = _central(func, sub, index)
    ref = np.broadcast_to(deriv, shape)[where]
    scale = 1.0 + float(np.max(np.abs(ref), initial=0.0))
    if np.max(np.abs(ref - central), initial=0.0) > _SMOOTHNESS_TOL * scale:
        raise ForceError("potential or force is not smooth: complex-step and central differences disagree")
    return deriv


def _central(func, args, index):
    h = _CENTRAL_STEP * max(1.0, float(np.max(np.abs(args[index]), initial=0.0)))
    plus = list(args)
    minus = list(args)
    plus[index] = args[index] + h
    minus[index] = args[index] - h
    return (np.asarray(func(*plus), dtype=float) - np.asarray(func(*minus), dtype=float)) / (2 * h)


@dataclass(frozen=True, eq=False)
class ForceField:
    """Force components ``F_alpha(r, v)``.

    ``depends_on_velocity`` and ``depends_on_position`` are checked against
    the functional form by sampling (see :meth:`validate`).
    ``velocity_divergence_free`` declares that no component ``F_a`` depends
    on its own velocity ``v_a`` (true for magnetic forces), so the velocity
    divergence vanishes without being evaluated.  ``sources`` lists the
    potentials a force was derived from; their smoothness is checked on
    every grid the force is sampled on.
    """

    components: tuple
    depends_on_velocity: bool
    depends_on_position: bool = True
    label: str = "F"
    velocity_divergence_free: bool = False
    sources: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps or not all(callable(c) for c in comps):
            raise ForceError("force components must be a nonempty sequence of callables")
        object.__setattr__(self, "components", comps)

    @property
    def config_dim(self) -> int:
        return len(self.components)

    def __call__(self, r: Sequence, v: Sequence) -> list:
        """Evaluate every component; results broadcast to a common shape."""
        vals = [np.asarray(c(r, v)) for c in self.components]
        shape = _common_shape(list(r) + list(v) + vals)
        return [_broadcast_like(x, shape) if not np.iscomplexobj(x) else np.broadcast_to(x, shape) for x in vals]

    def on_grid(self, grid) -> list:
        """Components sampled on the position and velocity axes of ``grid``."""
        if grid.config_dim != self.config_dim:
            raise ForceError(
                f"force has {self.config_dim} components, grid has {grid.config_dim} configuration axes"
            )
        for source in self.sources:
            source.check_smooth(grid)
        return self(grid.positions(), grid.velocities())

    def __add__(self, other):
        if not isinstance(other, ForceField):
            return NotImplemented
        if other.config_dim != self.config_dim:
            raise ForceError("cannot add force fields of different dimension")
        comps = tuple(
            (lambda a, b: (lambda r, v: np.asarray(a(r, v)) + np.asarray(b(r, v))))(a, b)
            for a, b in zip(self.components, other.components)
        )
        return ForceField(
            comps,
            self.depends_on_velocity or other.depends_on_velocity,
            self.depends_on_position or other.depends_on_position,
            f"{self.label} + {other.label}",
            self._divergence_free and other._divergence_free,
            self.sources + other.sources,
        )

    @property
    def _divergence_free(self) -> bool:
        return self.velocity_divergence_free or not self.depends_on_velocity

    def __sub__(self, other):
        if not isinstance(other, ForceField):
            return NotImplemented
        return self + other.scaled(-1.0)

    def scaled(self, factor: float):
        comps = tuple((lambda c: (lambda r, v: factor * np.asarray(c(r, v))))(c) for c in self.components)
        return ForceField(comps, self.depends_on_velocity, self.depends_on_position, f"{factor:g}*{self.label}",
                          self.velocity_divergence_free, self.sources)

    def velocity_divergence(self, r: Sequence, v: Sequence, masses=None) -> np.ndarray:
        """``sum_alpha d(F_alpha / m_alpha) / d v_alpha``; zero if v-independent."""
        d = self.config_dim
        masses = np.ones(d) if masses is None else np.broadcast_to(np.asarray(masses, float), (d,))
        shape = _common_shape(list(r) + list(v))
        if self._divergence_free:
            return np.zeros(shape)
        return self._sampled_divergence(r, v, masses, shape)

    def _sampled_divergence(self, r, v, masses, shape):
        total = np.zeros(shape)
        for a, comp in enumerate(self.components):
            def f(*vv, comp=comp):
                return comp(r, list(vv))

            total = total + partial_derivative(f, v, a, check=False) / masses[a]
        return total

    def validate(self, grid=None, samples: int = 16, seed: int = 7) -> None:
        """Check finiteness and the dependence flags by random sampling."""
        d = self.config_dim
        rng = np.random.default_rng(seed)
        if grid is not None:
            lo, hi = grid.lower, grid.upper
        else:
            lo, hi = -np.ones(2 * d), np.ones(2 * d)
        pts = rng.uniform(lo, hi, size=(samples, 2 * d)).T
        r, v = list(pts[:d]), list(pts[d:])
        base = self(r, v)
        if not all(np.all(np.isfinite(b)) for b in base):
            raise ForceError(f"force {self.label!r} is not finite on the sample points")
        v2 = [x + rng.uniform(0.5, 1.5, size=x.shape) for x in v]
        r2 = [x + rng.uniform(0.5, 1.5, size=x.shape) for x in r]
        dv = max(float(np.max(np.abs(a - b))) for a, b in zip(base, self(r, v2)))
        dr = max(float(np.max(np.abs(a - b))) for a, b in zip(base, self(r2, v)))
        scale = 1e-12 * (1.0 + max(float(np.max(np.abs(b))) for b in base))
        if (dv > scale) != bool(self.depends_on_velocity):
            raise ForceError(
                f"force {self.label!r}: depends_on_velocity={self.depends_on_velocity} "
                f"contradicts sampled velocity dependence"
            )
        if dr > scale and not self.depends_on_position:
            raise ForceError(f"force {self.label!r} depends on position but is flagged otherwise")
        if self.velocity_divergence_free:
            div = self._sampled_divergence(r, v, np.ones(d), _common_shape(r + v))
            if float(np.max(np.abs(div))) > 1e-10 * (1.0 + float(np.max(np.abs(base)))):
                raise ForceError(f"force {self.label!r} is flagged velocity-divergence free but is not")


def zero_force(config_dim: int) -> ForceField:
    return ForceField(tuple(lambda r, v: 0.0 for _ in range(config_dim)), False, False, "0")


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Static scalar potential ``phi(r)`` and vector potential ``A(r)``.

    Either part may be ``None`` (identically zero).  Callables take the d
    position arrays as separate positional arguments.
    """

    config_dim: int
    phi: Callable | None = None
    A: tuple | None = None
    label: str = "potentials"

    def __post_init__(self):
        if self.A is not None:
            A = tuple(self.A)
            if len(A) != self.config_dim:
                raise ForceError(f"vector potential needs {self.config_dim} components, got {len(A)}")
            object.__setattr__(self, "A", A)

    @property
    def has_vector_potential(self) -> bool:
        return self.A is not None

    def phi_values(self, r: Sequence) -> np.ndarray:
        shape = _common_shape(r)
        if self.phi is None:
            return np.zeros(shape)
        return _broadcast_like(self.phi(*r), shape)

    def A_values(self, r: Sequence) -> list:
        shape = _common_shape(r)
        if self.A is None:
            return [np.zeros(shape) for _ in range(self.config_dim)]
        return [_broadcast_like(a(*r), shape) for a in self.A]

    def grad_phi(self, r: Sequence) -> list:
        shape = _common_shape(r)
        if self.phi is None:
            return [np.zeros(shape) for _ in range(self.config_dim)]
        return [_broadcast_like(partial_derivative(self.phi, r, a), shape) for a in range(self.config_dim)]

    def grad_A(self, r: Sequence) -> list:
        """``dA[alpha][beta] = d A_beta / d x_alpha``."""
        shape = _common_shape(r)
        d = self.config_dim
        if self.A is None:
            return [[np.zeros(shape) for _ in range(d)] for _ in range(d)]
        return [[_broadcast_like(partial_derivative(self.A[b], r, a), shape) for b in range(d)] for a in range(d)]

    def check_smooth(self, grid, growth: float = SMOOTHNESS_GROWTH) -> None:
        """Reject potentials that are not smooth at the grid resolution.

        Second differences of a smooth function converge to ``h**2 f''``; at a
        kink or an unresolved oscillation they grow like ``1/h``.  Each part
        is sampled on the position grid and on a grid refined by two along
        one axis at a time; raises :class:`ForceError` when the scaled second
        difference grows by more than ``growth`` under refinement.
        """
        d = self.config_dim
        parts = [("phi", self.phi)] if self.phi is not None else []
        parts += [(f"A[{i}]", a) for i, a in enumerate(self.A or ())]
        for name, f in parts:
            for a in range(d):
                h = grid.spacing[a] / 2.0
                axes = [np.asarray(grid.coords[b], float) for b in range(d)]
                axes[a] = grid.lower[a] + h * np.arange(2 * grid.shape[a])
                mesh = np.meshgrid(*axes, indexing="ij")
                fine = np.broadcast_to(np.asarray(f(*mesh), dtype=float), mesh[0].shape)
                coarse = fine[(slice(None),) * a + (slice(None, None, 2),)]
                floor = 1e-9 * (1.0 + float(np.max(np.abs(fine)))) / h**2
                d_fine = float(np.max(np.abs(np.diff(fine, 2, axis=a)))) / h**2
                d_coarse = float(np.max(np.abs(np.diff(coarse, 2, axis=a)))) / (2 * h) ** 2
                if d_fine > growth * d_coarse + floor:
                    raise ForceError(
                        f"potential {self.label!r} part {name} is not smooth at the resolution of axis "
                        f"{grid.axis_names[a]!r}: second differences grow {d_fine / max(d_coarse, floor):.3g}x "
                        f"under refinement"
                    )

    def magnetic_field(self, r: Sequence):
        """Out-of-plane ``B_z = dA_y/dx - dA_x/dy`` (d = 2 only)."""
        if self.config_dim != 2:
            raise ForceError("a scalar magnetic field exists only for d = 2")
        dA = self.grad_A(r)
        return dA[0][1] - dA[1][0]


def force_from_potentials(p: PotentialPair) -> ForceField:
    """``F = E + v x B`` with ``E = -grad phi`` and ``B = curl A``.

    Componentwise ``F_a = -d_a phi + v_b (d_a A_b - d_b A_a)``.
    """
    d = p.config_dim

    def component(a):
        def f(r, v):
            out = -partial_derivative(p.phi, r, a) if p.phi is not None else 0.0
            if p.A is not None:
                for b in range(d):
                    if b != a:
                        curl = partial_derivative(p.A[b], r, a) - partial_derivative(p.A[a], r, b)
                        out = out + v[b] * curl
            return out

        return f

    magnetic = p.A is not None and d > 1
    # F_a involves v_b for b != a only, so its velocity divergence is zero
    return ForceField(tuple(component(a) for a in range(d)), magnetic, True, f"force({p.label})", True, (p,))


# ----------------------------------------------------------------------------
# named built-ins


def quadratic(config_dim: int = 1, k: float = 1.0, center=0.0) -> PotentialPair:
    """``phi = k |r - c|^2 / 2``."""
    c = np.broadcast_to(np.asarray(center, float), (config_dim,))

    def phi(*r):
        return 0.5 * k * sum((x - c0) ** 2 for x, c0 in zip(r, c))

    return PotentialPair(config_dim, phi=phi, label=f"quadratic(k={k:g})")


def uniform_B(B: float = 1.0) -> PotentialPair:
    """Uniform out-of-plane field in the symmetric gauge ``A = (-B y/2, B x/2)``."""
    return PotentialPair(
        2,
        A=(lambda x, y: -0.5 * B * y + 0.0 * x, lambda x, y: 0.5 * B * x + 0.0 * y),
        label=f"uniform_B(B={B:g})",
    )


def constant_A(values) -> PotentialPair:
    """Spatially constant vector potential (no field)."""
    vals = tuple(float(a) for a in values)
    comps = tuple((lambda a: (lambda *r: a + 0.0 * r[0]))(a) for a in vals)
    return PotentialPair(len(vals), A=comps, label=f"constant_A{vals}")


def vertical_axis(config_dim: int) -> int:
    """Default gravity direction: ``y`` (index 1) when present, else the only axis."""
    return min(1, config_dim - 1)


def uniform_gravity(config_dim: int = 1, g: float = 9.8, mass: float = 1.0, axis: int | None = None) -> ForceField:
    """``F = -m g`` along ``axis`` (default: :func:`vertical_axis`)."""
    axis = vertical_axis(config_dim) if axis is None else int(axis)
    if not 0 <= axis < config_dim:
        raise ForceError(f"gravity axis {axis} out of range")
    comps = tuple((lambda a: (lambda r, v: -mass * g if a == axis else 0.0))(a) for a in range(config_dim))
    return ForceField(comps, False, False, f"uniform_gravity(g={g:g})")


def linear_drag(config_dim: int = 1, gamma: float = 0.1) -> ForceField:
    """``F = -gamma v``."""
    comps = tuple((lambda a: (lambda r, v: -gamma * v[a]))(a) for a in range(config_dim))
    return ForceField(comps, True, False, f"linear_drag(gamma={gamma:g})")


def harmonic_force(config_dim: int = 1, k: float = 1.0) -> ForceField:
    """``F = -k r``."""
    comps = tuple((lambda a: (lambda r, v: -k * r[a]))(a) for a in range(config_dim))
    return ForceField(comps, False, True, f"harmonic(k={k:g})")


def harmonic_coupling(k: float = 1.0) -> ForceField:
    """Pair force ``F1 = -k (x1 - x2) = -F2`` on the two-particle grid."""
    return ForceField(
        (lambda r, v: -k * (r[0] - r[1]), lambda r, v: k * (r[0] - r[1])),
        False,
        True,
        f"harmonic_coupling(k={k:g})",
    )


FORCE_BUILTINS = ("uniform_gravity", "linear_drag", "harmonic_coupling")
POTENTIAL_BUILTINS = ("quadratic", "uniform_B")
