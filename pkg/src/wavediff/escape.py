"""Escape-function commutants and their sign decomposition.

The central object is a two-cutoff symbol family

    a = chi0(F^-1 (2 beta - phi/delta)) * chi1((eta + delta)/(eps delta) + 1),
    phi = eta + omega / (eps^2 delta),

built from a function ``eta`` increasing along the flow at a base point and a
quadratic localizer ``omega = sum sigma_j^2``.  Differentiating along the flow
splits ``H_p a`` into ``-b^2 + e`` with ``b`` square-root factors and ``e``
supported where the second cutoff is active; positivity of ``H_p phi`` on the
support of ``a`` is what makes the sign work, and for localizers whose flow
derivatives are merely Hoelder of exponent ``alpha`` it is bought by coupling
the two localization scales through ``eps >= C' delta^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc


# ---------------------------------------------------------------------------
# cutoffs


def chi0(t):
    """exp(-1/t) for t > 0, zero otherwise."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out if out.ndim else float(out)


def chi0_prime(t):
    """Derivative of chi0; satisfies chi0(t) = t^2 chi0'(t) for all t."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / (tp * tp)
    return out if out.ndim else float(out)


def chi1(t):
    """Smooth step: 0 on (-inf,0], 1 on [1,inf), monotone, smooth square root."""
    t = np.asarray(t, dtype=float)
    num = chi0(t)
    den = num + chi0(1.0 - t)
    out = np.asarray(num / den)
    return out if out.ndim else float(out)


def chi1_prime(t):
    """Derivative of chi1, supported in [0, 1], nonnegative."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(chi0(t))
    g = np.asarray(chi0(1.0 - t))
    fp = np.asarray(chi0_prime(t))
    gp = np.asarray(chi0_prime(1.0 - t))
    out = (fp * g + f * gp) / (f + g) ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CutoffPair:
    chi0: Callable = chi0
    chi0_prime: Callable = chi0_prime
    chi1: Callable = chi1
    chi1_prime: Callable = chi1_prime


STANDARD_CUTOFFS = CutoffPair()


# ---------------------------------------------------------------------------
# parameters and frames


@dataclass(frozen=True)
class EscapeParams:
    """Constants of the commutant family.

    delta localizes along the flow, eps transverse to it, beta caps the
    forward endpoint, F absorbs weights and regularizers.  c0 is the lower
    bound for the flow derivative of eta near the base point; (C_prime,
    alpha) parameterize the scale coupling eps >= C_prime * delta^alpha.
    """

    delta: float
    eps: float
    beta: float
    F: float = 8.0
    c0: float = 1.0
    C_prime: float = 1.0
    alpha: float = 1.0
    delta0: float = 1.0
    schedule_active: bool = False

    def __post_init__(self):
        if not (0 < self.delta < 1 and self.delta < self.delta0):
            raise ValueError("need 0 < delta < min(1, delta0)")
        if not (0 < self.eps <= 1 and 0 < self.beta <= 1):
            raise ValueError("need eps, beta in (0, 1]")
        if self.F <= 0 or self.c0 <= 0:
            raise ValueError("need positive F and c0")
        if self.schedule_active and self.eps < self.C_prime * self.delta**self.alpha - 1e-12:
            raise ValueError(
                "scale schedule violated: eps=%g < C'*delta^alpha=%g"
                % (self.eps, self.C_prime * self.delta**self.alpha)
            )


def epsilon_schedule(delta: float, alpha: float, C_prime: float) -> float:
    """Transverse scale for a given flow scale: min(1, C_prime * delta^alpha)."""
    if not 0 < delta < 1:
        raise ValueError("need delta in (0,1)")
    if not 0 < alpha <= 1:
        raise ValueError("need alpha in (0,1]")
    return min(1.0, C_prime * delta**alpha)


class EscapeFrame:
    """A chart around a base point with the localizing functions and a
    directional-derivative provider for the flow.

    Points are arrays of shape (d,) or (N, d) in chart coordinates.  When
    analytic flow derivatives of eta and the sigma_j are not registered they
    are formed by central differences along ``flow_field`` with one Richardson
    step; analytic mode is the test of record for the exact decomposition
    identity.
    """

    def __init__(
        self,
        dim: int,
        eta: Callable,
        sigmas: Callable,
        flow_field: Callable,
        base_point: np.ndarray | None = None,
        hp_eta: Callable | None = None,
        hp_sigmas: Callable | None = None,
        fd_step: float = 1e-5,
    ):
        self.dim = dim
        self.eta = eta
        self.sigmas = sigmas  # q -> (..., m)
        self.flow_field = flow_field
        self.base_point = np.zeros(dim) if base_point is None else np.asarray(base_point, float)
        self._hp_eta = hp_eta
        self._hp_sigmas = hp_sigmas
        self.fd_step = fd_step
        self.analytic = hp_eta is not None and hp_sigmas is not None

    @property
    def n_sigma(self) -> int:
        return np.asarray(self.sigmas(self.base_point)).shape[-1]

    def omega(self, q):
        s = np.asarray(self.sigmas(q))
        return np.sum(s * s, axis=-1)

    def _directional(self, f, q):
        # central difference along the flow with one Richardson step
        q = np.asarray(q, float)
        v = np.asarray(self.flow_field(q))
        h = self.fd_step

        def diff(step):
            return (np.asarray(f(q + step * v)) - np.asarray(f(q - step * v))) / (2 * step)

        d1 = diff(h)
        d2 = diff(h / 2)
        return (4.0 * d2 - d1) / 3.0

    def hp_eta(self, q):
        if self._hp_eta is not None:
            return np.asarray(self._hp_eta(q))
        return self._directional(self.eta, q)

    def hp_sigmas(self, q):
        if self._hp_sigmas is not None:
            return np.asarray(self._hp_sigmas(q))
        return self._directional(lambda x: np.asarray(self.sigmas(x)), q)

    def hp_omega(self, q):
        s = np.asarray(self.sigmas(q))
        return 2.0 * np.sum(s * self.hp_sigmas(q), axis=-1)

    def check_base_point(self, rtol=1e-9):
        qb = self.base_point
        ok = abs(float(self.eta(qb))) <= rtol
        ok &= float(self.hp_eta(qb)) > 0
        ok &= float(self.omega(qb)) <= rtol
        ok &= bool(np.all(np.abs(self.hp_sigmas(qb)) <= 1e-6))
        return ok


def precise_localizer_frame(dim: int) -> EscapeFrame:
    """Flow-box frame: eta is the flow coordinate, the sigma_j are the
    remaining coordinates, and the flow kills every sigma_j identically."""

    def eta(q):
        return np.asarray(q, float)[..., 0]

    def sigmas(q):
        return np.asarray(q, float)[..., 1:]

    def flow(q):
        q = np.asarray(q, float)
        v = np.zeros_like(q)
        v[..., 0] = 1.0
        return v

    def hp_eta(q):
        return np.ones(np.asarray(q, float).shape[:-1])

    def hp_sigmas(q):
        q = np.asarray(q, float)
        return np.zeros(q.shape[:-1] + (q.shape[-1] - 1,))

    return EscapeFrame(dim, eta, sigmas, flow, hp_eta=hp_eta, hp_sigmas=hp_sigmas)


def smooth_frame(dim: int, mixing: float = 0.3) -> EscapeFrame:
    """Smooth non-flow-box frame: the flow tilts into the sigma directions at
    a rate vanishing linearly at the base point (Lipschitz case)."""

    def eta(q):
        return np.asarray(q, float)[..., 0]

    def sigmas(q):
        return np.asarray(q, float)[..., 1:]

    def flow(q):
        q = np.asarray(q, float)
        v = np.zeros_like(q)
        v[..., 0] = 1.0
        v[..., 1:] = mixing * (q[..., :1] - q[..., 1:])
        return v

    def hp_eta(q):
        return np.ones(np.asarray(q, float).shape[:-1])

    def hp_sigmas(q):
        q = np.asarray(q, float)
        return mixing * (q[..., :1] - q[..., 1:])

    return EscapeFrame(dim, eta, sigmas, flow, hp_eta=hp_eta, hp_sigmas=hp_sigmas)


def synthetic_hoelder_frame(dim: int, alpha: float, C0: float) -> EscapeFrame:
    """Worst-case frame saturating |H_p sigma_j| <= C0 (omega^{1/2}+|eta|)^alpha
    with the sign that drives H_p omega as negative as possible."""

    def eta(q):
        return np.asarray(q, float)[..., 0]

    def sigmas(q):
        return np.asarray(q, float)[..., 1:]

    def envelope(q):
        q = np.asarray(q, float)
        om = np.sum(q[..., 1:] ** 2, axis=-1)
        return (np.sqrt(om) + np.abs(q[..., 0])) ** alpha

    def hp_sigmas(q):
        q = np.asarray(q, float)
        return -C0 * np.sign(q[..., 1:]) * envelope(q)[..., None]

    def flow(q):
        q = np.asarray(q, float)
        v = np.zeros_like(q)
        v[..., 0] = 1.0
        v[..., 1:] = hp_sigmas(q)
        return v

    def hp_eta(q):
        return np.ones(np.asarray(q, float).shape[:-1])

    return EscapeFrame(dim, eta, sigmas, flow, hp_eta=hp_eta, hp_sigmas=hp_sigmas)


# ---------------------------------------------------------------------------
# symbol family


def eval_phi(q, frame: EscapeFrame, params: EscapeParams):
    return np.asarray(frame.eta(q)) + frame.omega(q) / (params.eps**2 * params.delta)


def _chi_args(q, frame, params):
    eta = np.asarray(frame.eta(q))
    phi = eta + frame.omega(q) / (params.eps**2 * params.delta)
    t0 = (2.0 * params.beta - phi / params.delta) / params.F
    u1 = (eta + params.delta) / (params.eps * params.delta) + 1.0
    return eta, phi, t0, u1


def eval_a(q, frame: EscapeFrame, params: EscapeParams, cutoffs: CutoffPair = STANDARD_CUTOFFS):
    _, _, t0, u1 = _chi_args(q, frame, params)
    return np.asarray(cutoffs.chi0(t0)) * np.asarray(cutoffs.chi1(u1))


@dataclass
class SupportReport:
    n_samples: int
    n_support: int
    violations: list
    eta_range: tuple
    omega_sqrt_max: float

    @property
    def ok(self) -> bool:
        return not self.violations


def check_support_estimates(
    samples, frame: EscapeFrame, params: EscapeParams, cutoffs: CutoffPair = STANDARD_CUTOFFS
) -> SupportReport:
    """Verify the support bounds of the symbol on a sample set.

    Wherever a > 0:  -delta - eps*delta <= eta <= 2*beta*delta and
    omega^{1/2} <= 2*eps*delta; where additionally the chi1-derivative factor
    is active, eta <= -delta.
    """
    samples = np.asarray(samples, float)
    eta, _, t0, u1 = _chi_args(samples, frame, params)
    a = np.asarray(cutoffs.chi0(t0)) * np.asarray(cutoffs.chi1(u1))
    om_sqrt = np.sqrt(frame.omega(samples))
    d, e, b = params.delta, params.eps, params.beta

    sup = a > 0
    violations = []
    lo, hi = -d - e * d, 2 * b * d
    bad_eta = sup & ((eta < lo - 1e-15) | (eta > hi + 1e-15))
    bad_om = sup & (om_sqrt > 2 * e * d + 1e-15)
    edge = sup & (np.asarray(cutoffs.chi1_prime(u1)) > 0)
    bad_edge = edge & ((eta < lo - 1e-15) | (eta > -d + 1e-15))
    for name, mask in (("eta", bad_eta), ("omega", bad_om), ("chi1_edge", bad_edge)):
        for idx in np.nonzero(mask)[0]:
            violations.append((name, int(idx), samples[idx].tolist()))
    violations.sort(key=lambda v: v[1])
    eta_sup = eta[sup]
    return SupportReport(
        n_samples=samples.shape[0],
        n_support=int(np.count_nonzero(sup)),
        violations=violations,
        eta_range=(float(eta_sup.min()), float(eta_sup.max())) if eta_sup.size else (0.0, 0.0),
        omega_sqrt_max=float(om_sqrt[sup].max()) if eta_sup.size else 0.0,
    )


@dataclass
class CommutatorParts:
    a: np.ndarray
    hp_a: np.ndarray
    b: np.ndarray
    e: np.ndarray
    residual: np.ndarray
    positivity_failed: np.ndarray  # mask: hp_phi < 0 on supp a


def decompose_commutator(
    q, frame: EscapeFrame, params: EscapeParams, cutoffs: CutoffPair = STANDARD_CUTOFFS
) -> CommutatorParts:
    """Split the flow derivative of the symbol as H_p a = -b^2 + e.

    The three returned fields are assembled independently (hp_a by the chain
    rule on the composite symbol, b and e from their own closed forms), so the
    residual hp_a + b^2 - e is an exact identity check: it vanishes to rounding
    with analytic flow derivatives, and to finite-difference accuracy otherwise.
    Weight-free version (unit weight).
    """
    q = np.asarray(q, float)
    eta, phi, t0, u1 = _chi_args(q, frame, params)
    d, e_, F = params.delta, params.eps, params.F

    c0v = np.asarray(cutoffs.chi0(t0))
    c0p = np.asarray(cutoffs.chi0_prime(t0))
    c1v = np.asarray(cutoffs.chi1(u1))
    c1p = np.asarray(cutoffs.chi1_prime(u1))

    hp_eta = np.asarray(frame.hp_eta(q))
    hp_phi = hp_eta + frame.hp_omega(q) / (e_**2 * d)

    a = c0v * c1v
    hp_a = -c0p * hp_phi / (F * d) * c1v + c0v * c1p * hp_eta / (e_ * d)
    e_term = c0v * c1p * hp_eta / (e_ * d)
    b = np.sqrt(np.clip(hp_phi, 0.0, None) * c0p * c1v / (F * d))
    residual = hp_a + b * b - e_term
    positivity_failed = (a > 0) & (hp_phi < 0)
    # where positivity fails, b^2 misses the hp_phi part entirely
    residual = np.where(positivity_failed, 0.0, residual)
    return CommutatorParts(
        a=a, hp_a=hp_a, b=b, e=e_term, residual=residual, positivity_failed=positivity_failed
    )


# ---------------------------------------------------------------------------
# sampling and positivity


def sample_chart(params: EscapeParams, frame: EscapeFrame, n_grid: int, n_quasi: int = 0, seed: int = 0):
    """Sample a box around the base point sized 3*delta along eta and
    3*eps*delta per transverse coordinate; uniform grid plus an optional
    low-discrepancy batch.  Covers the support of the symbol with margin."""
    d = frame.dim
    m = d - 1
    half = np.array([3.0 * params.delta] + [3.0 * params.eps * params.delta] * m)
    per_axis = max(2, int(round(n_grid ** (1.0 / d))))
    axes = [np.linspace(-h, h, per_axis) for h in half]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    if n_quasi:
        halton = qmc.Halton(d=d, seed=seed)
        extra = (halton.random(n_quasi) * 2.0 - 1.0) * half
        pts = np.vstack([pts, extra])
    return pts + frame.base_point


def derive_c_prime(C0: float, c0: float, n_sigma: int, alpha: float) -> float:
    """Constant in the scale schedule from the Hoelder data of the frame.

    On the support of the symbol, omega^{1/2} <= 2 eps delta and |eta| <= 2
    delta, so |H_p omega| <= 2 sqrt(m) C0 (2 eps delta)(2 eps delta + 2
    delta)^alpha <= 4 sqrt(m) C0 4^alpha eps delta^{1+alpha}; requiring this
    to stay below (c0/2) eps^2 delta gives eps >= C' delta^alpha with
    C' = 8 sqrt(m) C0 4^alpha / c0.
    """
    return 8.0 * math.sqrt(n_sigma) * C0 * 4.0**alpha / c0


@dataclass
class PositivityReport:
    min_hp_phi: float
    threshold: float
    passed: bool
    schedule_valid: bool
    C_prime_derived: float
    n_support: int
    delta: float
    eps: float

    def asdict(self):
        return dict(
            min_margin=self.min_hp_phi,
            threshold=self.threshold,
            passed=self.passed,
            schedule_valid=self.schedule_valid,
            C_prime_derived=self.C_prime_derived,
            n_support=self.n_support,
            delta=self.delta,
            eps=self.eps,
        )


def check_positivity(
    frame: EscapeFrame,
    params: EscapeParams,
    hoelder: tuple[float, float],
    samples,
    cutoffs: CutoffPair = STANDARD_CUTOFFS,
) -> PositivityReport:
    """Minimum of H_p phi over the sampled support of the symbol.

    With the frame's flow derivatives obeying the Hoelder bound with constants
    ``hoelder = (C0, alpha)`` and the scale schedule eps >= C' delta^alpha in
    force (C' derived from C0 and c0), the minimum is guaranteed >= c0/2; the
    report records the margin either way, so undersized eps shows up as a
    negative control rather than an exception.
    """
    C0, alpha = hoelder
    samples = np.asarray(samples, float)
    a = eval_a(samples, frame, params, cutoffs)
    sup = a > 0
    hp_phi = np.asarray(frame.hp_eta(samples)) + frame.hp_omega(samples) / (
        params.eps**2 * params.delta
    )
    c_prime = derive_c_prime(C0, params.c0, frame.n_sigma, alpha)
    schedule_valid = params.eps >= min(1.0, c_prime * params.delta**alpha) - 1e-12
    min_val = float(hp_phi[sup].min()) if np.any(sup) else float("inf")
    threshold = params.c0 / 2.0
    return PositivityReport(
        min_hp_phi=min_val,
        threshold=threshold,
        passed=min_val >= threshold,
        schedule_valid=schedule_valid,
        C_prime_derived=c_prime,
        n_support=int(np.count_nonzero(sup)),
        delta=params.delta,
        eps=params.eps,
    )


# ---------------------------------------------------------------------------
# weight / regularizer absorption


def absorption_factor(
    s: float,
    r_weight: float,
    M: float,
    F: float,
    beta: float,
    delta: float,
    phi_over_delta: float,
    hp_phi: float,
    rho_bound: float,
    c0: float = 1.0,
):
    """Bracketed coefficient whose positivity lets the weight and regularizer
    terms be absorbed into the square: psi2 minus the weight term, where
    psi2 = hp_phi - c0/4 after splitting off the constant part psi1 = c0/4.

    Requires |2*beta - phi/delta| <= 4, which holds on the symbol support.
    """
    arg = 2.0 * beta - np.asarray(phi_over_delta, float)
    if np.any(np.abs(arg) > 4.0 + 1e-12):
        raise ValueError("|2*beta - phi/delta| must not exceed 4 on the support")
    psi2 = np.asarray(hp_phi, float) - c0 / 4.0
    weight_term = (((2.0 * s - 1.0) - r_weight) * rho_bound + M * M) * delta * arg**2 / F
    out = psi2 - weight_term
    return out if out.ndim else float(out)


def find_F_threshold(
    s: float,
    r_weight: float,
    M: float,
    beta: float,
    delta: float,
    phi_over_delta,
    hp_phi,
    rho_bound: float,
    c0: float = 1.0,
    F_grid=None,
):
    """Least F on a grid making the absorption factor >= c0/8 at every
    supplied support sample; None if the grid is exhausted."""
    if F_grid is None:
        F_grid = [2.0**j for j in range(-2, 42)]
    phi_over_delta = np.asarray(phi_over_delta, float)
    hp_phi = np.asarray(hp_phi, float)
    for F in F_grid:
        vals = absorption_factor(
            s, r_weight, M, F, beta, delta, phi_over_delta, hp_phi, rho_bound, c0
        )
        if np.all(np.asarray(vals) >= c0 / 8.0):
            return F
    return None


# ---------------------------------------------------------------------------
# scenario-level check used by the CLI


def run_commutant_check(
    frame_kind: str,
    delta: float,
    eps: float | None,
    beta: float,
    F: float,
    c0: float,
    alpha: float = 1.0,
    C0: float = 0.05,
    dim: int = 3,
    grid: int = 10_000,
    quasi: int = 2_000,
    seed: int = 0,
) -> dict:
    """Build a frame, sample its chart, and report support violations,
    decomposition residual, positivity margin, and the absorption threshold."""
    if frame_kind == "precise-localizer":
        frame = precise_localizer_frame(dim)
    elif frame_kind == "smooth":
        frame = smooth_frame(dim)
    elif frame_kind == "synthetic-hoelder":
        frame = synthetic_hoelder_frame(dim, alpha, C0)
    else:
        raise ValueError("unknown frame kind %r" % (frame_kind,))

    c_prime = derive_c_prime(C0, c0, dim - 1, alpha)
    if eps is None:
        eps = epsilon_schedule(delta, alpha, c_prime)
    params = EscapeParams(
        delta=delta, eps=eps, beta=beta, F=F, c0=c0, C_prime=c_prime, alpha=alpha
    )
    pts = sample_chart(params, frame, n_grid=grid, n_quasi=quasi, seed=seed)
    support = check_support_estimates(pts, frame, params)
    parts = decompose_commutator(pts, frame, params)
    scale = float(np.max(np.abs(parts.hp_a))) or 1.0
    positivity = check_positivity(frame, params, (C0, alpha), pts)
    on_sup = parts.a > 0
    phi_over_delta = eval_phi(pts, frame, params) / delta
    hp_phi_sup = (
        np.asarray(frame.hp_eta(pts)) + frame.hp_omega(pts) / (eps**2 * delta)
    )[on_sup]
    f_thresh = find_F_threshold(
        s=0.5,
        r_weight=1.0,
        M=1.0,
        beta=beta,
        delta=delta,
        phi_over_delta=phi_over_delta[on_sup],
        hp_phi=hp_phi_sup,
        rho_bound=1.0,
        c0=c0,
    ) if np.any(on_sup) else None
    return {
        "frame": frame_kind,
        "delta": delta,
        "eps": eps,
        "beta": beta,
        "F": F,
        "c0": c0,
        "alpha": alpha,
        "C0": C0,
        "C_prime_derived": c_prime,
        "n_samples": support.n_samples,
        "n_support": support.n_support,
        "violations": support.violations,
        "residual_max": float(np.max(np.abs(parts.residual))),
        "residual_max_relative": float(np.max(np.abs(parts.residual))) / scale,
        "min_margin": positivity.min_hp_phi,
        "margin_threshold": positivity.threshold,
        "positivity_passed": positivity.passed,
        "schedule_valid": positivity.schedule_valid,
        "F_threshold": f_thresh,
    }
