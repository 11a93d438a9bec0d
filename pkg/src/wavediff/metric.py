"""Product-form Lorentzian metrics with a conormal sound-speed singularity.

The canonical family is isotropic and static: on coordinates
``(x', y, t)`` with the interface ``Y = {x' = 0}`` of codimension ``k``, the
sound speed is

    c(x') = c_bg + amp * |x'|^e * bump(|x'| / core),   e = s0 - 1 (k = 1),
                                                       e = s0 - k (k >= 2),

smooth away from ``Y`` and of class C^{1,alpha} across it with
``alpha = s0 - k - 1``; the bump keeps the profile compactly modulated so the
medium is exactly homogeneous outside the core.  The dual metric function is

    p(x, xi) = tau^2 - c(x')^2 (|xi'|^2 + |eta_y|^2),

so rays travel at speed ``c`` and the time-dual ``tau`` is conserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .escape import chi1, chi1_prime

CHAR_TOL = 1e-9


class BoundaryClass(Enum):
    HYPERBOLIC = "hyperbolic"
    GLANCING = "glancing"


class ClassificationError(ValueError):
    """Point not in the compressed characteristic set."""


class GlancingError(ValueError):
    """Operation requires a hyperbolic (transversal) boundary point."""


_PLATEAU = 0.3  # fraction of the core radius held exactly at profile value


def _bump(u):
    """Smooth plateau: 1 for u <= 0.3, 0 for u >= 1; the wide transition keeps
    the modulation's own reflections well below the singular ones."""
    u = np.asarray(u, float)
    return 1.0 - np.asarray(chi1((u - _PLATEAU) / (1.0 - _PLATEAU)))


def _bump_prime(u):
    u = np.asarray(u, float)
    return -np.asarray(chi1_prime((u - _PLATEAU) / (1.0 - _PLATEAU))) / (1.0 - _PLATEAU)


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, float))
        object.__setattr__(self, "xi", np.asarray(self.xi, float))
        if self.x.shape != self.xi.shape:
            raise ValueError("position and covector must have matching shape")


@dataclass(frozen=True)
class BPoint:
    """Compressed covector: normal momentum rescaled by the distance to Y."""

    x: float
    y: np.ndarray
    sigma: float
    eta: np.ndarray


class ConormalMetric:
    """Sound-speed field with a radial conormal singularity at {x' = 0}."""

    def __init__(
        self,
        k: int = 1,
        n: int = 2,
        s0: float = 2.5,
        amp: float = 0.4,
        c_bg: float | Callable = 1.0,
        core_radius: float = 0.5,
        smooth_mod: Callable | None = None,
    ):
        if not (isinstance(k, int) and isinstance(n, int) and 1 <= k < n):
            raise ValueError("need integers 1 <= k < n")
        if not s0 > k + 1:
            raise ValueError("need s0 > k + 1 for a C^1 metric")
        self.k = k
        self.n = n
        self.s0 = float(s0)
        self.amp = float(amp)
        self._bg = c_bg
        self.c_bg = float(c_bg) if not callable(c_bg) else float(np.asarray(c_bg(np.zeros(1)))[0])
        self.core_radius = float(core_radius)
        self.smooth_mod = smooth_mod
        self.exponent = s0 - 1.0 if k == 1 else s0 - k
        self.alpha = min(1.0, s0 - k - 1.0)

    @property
    def background_constant(self) -> bool:
        return not callable(self._bg)

    def background(self, x):
        if callable(self._bg):
            return np.asarray(self._bg(np.asarray(x, float)), float)
        return np.full_like(np.asarray(x, float), self._bg)

    def _dbackground(self, x):
        if not callable(self._bg):
            return np.zeros_like(np.asarray(x, float))
        x = np.asarray(x, float)
        h = 1e-6
        return (self.background(x + h) - self.background(x - h)) / (2 * h)

    # -- radial profile ----------------------------------------------------
    def singular_part(self, r):
        r = np.abs(np.asarray(r, float))
        return self.amp * r**self.exponent * _bump(r / self.core_radius)

    def dsingular_part(self, r):
        """d/dr of the singular part; exponent > 1 makes it vanish at r = 0."""
        r = np.abs(np.asarray(r, float))
        u = r / self.core_radius
        e = self.exponent
        return self.amp * (
            e * r ** (e - 1.0) * _bump(u)
            + r**e * _bump_prime(u) / self.core_radius
        )

    def speed_radial(self, r):
        """Speed as a function of interface distance (constant background)."""
        r = np.asarray(r, float)
        c = self.c_bg + self.singular_part(r)
        return c if c.ndim else float(c)

    def dspeed_radial(self, r):
        d = self.dsingular_part(r)
        return d if np.asarray(d).ndim else float(d)

    def speed(self, x):
        """Speed at positions; 1D input means the single normal coordinate."""
        x = np.asarray(x, float)
        if self.k == 1 and x.ndim <= 1:
            c = self.background(x) + self.singular_part(np.abs(x))
        else:
            xp = x[..., : self.k]
            c = self.c_bg + self.singular_part(np.linalg.norm(xp, axis=-1))
        if self.smooth_mod is not None:
            c = c * self.smooth_mod(x)
        return c if np.asarray(c).ndim else float(c)

    def dspeed(self, x):
        """Signed d/dx of the speed for the k = 1 scalar-coordinate case."""
        if self.k != 1:
            raise ValueError("scalar derivative only defined for k = 1")
        x = np.asarray(x, float)
        d = self.dsingular_part(np.abs(x)) * np.sign(x) + self._dbackground(x)
        if self.smooth_mod is not None:
            raise NotImplementedError("derivative with modulation not needed")
        return d if np.asarray(d).ndim else float(d)

    def max_speed(self, x_lo: float, x_hi: float, samples: int = 4097) -> float:
        xs = np.linspace(x_lo, x_hi, samples)
        return float(np.max(self.speed(xs)))

    # -- dual metric ------------------------------------------------------
    def split(self, q: PhasePoint):
        """(x', y, t, xi', eta_y, tau) with t the last coordinate."""
        k = self.k
        return (
            q.x[:k],
            q.x[k:-1],
            q.x[-1],
            q.xi[:k],
            q.xi[k:-1],
            q.xi[-1],
        )

    def dual_hamiltonian(self, q: PhasePoint) -> float:
        xp, _, _, xip, eta, tau = self.split(q)
        if self.k == 1:
            c = float(self.speed(float(xp[0])))
        else:
            c = self.speed_radial(np.linalg.norm(xp))
        return float(tau**2 - c**2 * (np.dot(xip, xip) + np.dot(eta, eta)))

    def on_characteristic_set(self, q: PhasePoint, tol: float = CHAR_TOL) -> bool:
        scale = float(np.dot(q.xi, q.xi))
        if scale == 0:
            raise ValueError("covector must be nonzero")
        return abs(self.dual_hamiltonian(q)) <= tol * scale

    def hamilton_field(self, state: np.ndarray) -> np.ndarray:
        """Hamilton vector field on flattened states (x..., xi...)."""
        state = np.asarray(state, float)
        n = self.n
        x, xi = state[:n], state[n:]
        k = self.k
        xp = x[:k]
        spatial = xi[:-1]
        kin = float(np.dot(spatial, spatial))
        dx = np.empty(n)
        dxi = np.zeros(n)
        if k == 1:
            c = float(self.speed(float(x[0])))
            dxi[0] = 2.0 * c * float(self.dspeed(float(x[0]))) * kin
        else:
            r = float(np.linalg.norm(xp))
            c = self.speed_radial(r)
            if r > 0:
                dxi[:k] = 2.0 * c * self.dspeed_radial(r) * xp / r * kin
        dx[:-1] = -2.0 * c**2 * spatial
        dx[-1] = 2.0 * xi[-1]
        return np.concatenate([dx, dxi])

    def normal_form(self) -> "NormalFormCoeffs":
        """Boundary normal form of the dual metric for this product family."""
        m = self

        def a_coeff(x, y):
            return -m.speed_radial(abs(x)) ** 2

        def b_matrix(x, y):
            d = m.n - m.k
            c2 = m.speed_radial(abs(x)) ** 2
            diag = np.full(d, -c2)
            diag[-1] = 1.0  # time-dual slot
            return np.diag(diag)

        def c_cross(x, y):
            return np.zeros(m.n - m.k)

        return NormalFormCoeffs(A=a_coeff, B=b_matrix, C=c_cross)


class PiecewiseSpeed:
    """Jump-interface speed field: c_left for x < 0, c_right for x > 0.

    A jump sits one conormal order above a delta layer (s0 = 1 = codim), far
    below the C^1 regime; it serves as the negative control where no
    regularity gain is expected.
    """

    def __init__(self, c_left: float = 1.0, c_right: float = 1.3):
        self.c_left = float(c_left)
        self.c_right = float(c_right)
        self.k = 1
        self.n = 2
        self.s0 = 1.0
        self.amp = c_right - c_left
        self.c_bg = c_left
        self.core_radius = 0.0
        self.alpha = 0.0

    def speed(self, x):
        x = np.asarray(x, float)
        c = np.where(x < 0, self.c_left, self.c_right)
        return c if c.ndim else float(c)

    def reflection_coefficient(self) -> float:
        """Plane-wave matching for divergence form: continuity of u and of
        c^2 u_x gives R = (c_left - c_right) / (c_left + c_right)."""
        return (self.c_left - self.c_right) / (self.c_left + self.c_right)


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Dual metric in interface normal form: A dxi^2 + 2 C dxi deta + B deta^2,
    with A(0,y) < 0, C(0,y) = 0, and B(0,y) Lorentzian on the interface."""

    A: Callable
    B: Callable
    C: Callable

    def validate_at(self, y) -> bool:
        a0 = float(self.A(0.0, y))
        c0 = np.asarray(self.C(0.0, y), float)
        b0 = np.asarray(self.B(0.0, y), float)
        eigs = np.linalg.eigvalsh(b0)
        lorentzian = np.sum(eigs > 0) == 1 and np.sum(eigs < 0) == b0.shape[0] - 1
        return a0 < 0 and np.allclose(c0, 0.0) and lorentzian


def classify_boundary_point(
    nf: NormalFormCoeffs, y0, eta0, tol: float = CHAR_TOL
) -> BoundaryClass:
    """Hyperbolic if B(0,y0) eta0.eta0 > 0, glancing if it vanishes;
    negative values are outside the compressed characteristic set."""
    eta0 = np.asarray(eta0, float)
    norm = float(np.dot(eta0, eta0))
    if norm == 0:
        raise ClassificationError("zero tangential covector")
    unit = eta0 / np.sqrt(norm)
    b = float(unit @ np.asarray(nf.B(0.0, y0), float) @ unit)
    if b > tol:
        return BoundaryClass.HYPERBOLIC
    if abs(b) <= tol:
        return BoundaryClass.GLANCING
    raise ClassificationError(
        "B(0,y0) eta.eta = %g < 0: not in the compressed characteristic set" % b
    )


def compress(q: PhasePoint) -> BPoint:
    """Codimension-one compression (x, y, xi, eta) -> (x, y, x*xi, eta)."""
    x = float(q.x[0])
    return BPoint(x=x, y=q.x[1:].copy(), sigma=x * float(q.xi[0]), eta=q.xi[1:].copy())


@dataclass(frozen=True)
class RelatedRaySphere:
    """All covectors over a boundary point sharing tangential momentum: the
    normal momentum sweeps a sphere of fixed radius."""

    radius: float
    y0: np.ndarray
    eta0: np.ndarray
    k: int

    def point(self, direction) -> PhasePoint:
        u = np.asarray(direction, float)
        u = u / np.linalg.norm(u)
        x = np.concatenate([np.zeros(self.k), np.asarray(self.y0, float)])
        xi = np.concatenate([self.radius * u, np.asarray(self.eta0, float)])
        return PhasePoint(x, xi)


def related_rays(nf: NormalFormCoeffs, y0, eta0, tol: float = CHAR_TOL, k: int = 1):
    """Normal momenta compatible with the characteristic set over (0, y0, eta0).

    For k = 1 these are the two solutions of A xi^2 + B eta.eta = 0; for
    higher codimension the whole sphere of that radius, returned as a
    parameterized description.
    """
    cls = classify_boundary_point(nf, y0, eta0, tol)
    if cls is not BoundaryClass.HYPERBOLIC:
        raise GlancingError("related rays undefined at glancing points")
    eta0 = np.asarray(eta0, float)
    y0 = np.asarray(y0, float)
    a0 = float(nf.A(0.0, y0))
    b = float(eta0 @ np.asarray(nf.B(0.0, y0), float) @ eta0)
    radius = float(np.sqrt(-b / a0))
    if k == 1:
        out = []
        for sgn in (+1.0, -1.0):
            x = np.concatenate([[0.0], y0])
            xi = np.concatenate([[sgn * radius], eta0])
            out.append(PhasePoint(x, xi))
        return out
    return RelatedRaySphere(radius=radius, y0=y0, eta0=eta0, k=k)


def holder_estimate(field, ball, probe_scales, n_base: int = 400, seed: int = 0):
    """Fit a Hoelder exponent from sup difference quotients at dyadic scales.

    ``field`` maps arrays of points (N, d) or (N,) to scalar or vector values;
    ``ball`` is (center, radius).  For each scale h the sup over sampled base
    points and directions of |f(x + h u) - f(x)| is recorded, and the slope of
    log(sup) against log(h) is the exponent estimate.  Returns
    (alpha_hat, C_hat).
    """
    probe_scales = np.asarray(sorted(probe_scales), float)
    if probe_scales.size < 3:
        raise ValueError("need at least 3 probe scales")
    center, radius = ball
    center = np.atleast_1d(np.asarray(center, float))
    d = center.size
    rng = np.random.default_rng(seed)
    base = center + (rng.uniform(-1, 1, size=(n_base, d))) * radius
    # include points straddling the origin-distance extremes of the ball
    base = np.vstack([base, center, np.zeros((1, d))])
    base = base[np.max(np.abs(base - center), axis=1) <= radius]

    sups = []
    for h in probe_scales:
        if d == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            dirs = rng.normal(size=(16, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        best = 0.0
        for u in dirs:
            shifted = base + h * u
            f0 = np.asarray(field(base.squeeze(-1) if d == 1 else base), float)
            f1 = np.asarray(field(shifted.squeeze(-1) if d == 1 else shifted), float)
            diff = np.abs(f1 - f0)
            if diff.ndim > 1:
                diff = diff.max(axis=-1)
            best = max(best, float(diff.max()))
        sups.append(best)
    sups = np.asarray(sups)
    if np.any(sups <= 0):
        # flat field: report Lipschitz-or-better with zero constant
        return float("inf"), 0.0
    slope, intercept = np.polyfit(np.log(probe_scales), np.log(sups), 1)
    return float(slope), float(np.exp(intercept))
