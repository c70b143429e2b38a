"""Wilson-Cowan (WC) and local histogram equalisation (LHE) neural fields.

Every model evolves an activation ``a`` on a periodic grid of any shape
(an image for the 2D models, an ``(N, N, K)`` orientation volume for the 3D
ones)::

    WC :  da/dt = -beta a + nu * W (*) sigmoid(a)                + h
    LHE:  da/dt = -beta a + nu * sum_j W_ij sigmoid(a_i - a_j)   + h

with ``W`` a normalised non-negative kernel and ``(*)`` circular
convolution.  The LHE right-hand side is minus the gradient of
:func:`energy_lhe`; the WC one is not a gradient field, which
:func:`jacobian_probe` exhibits numerically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import comb

from .errors import DegenerateStateError, InvalidParameterError
from .grid import (
    check_image,
    circular_convolve,
    convolve_spectrum,
    gaussian2d,
    gaussian3d,
    kernel_spectrum,
    local_mean,
    wrapped_gaussian_1d,
)
from .lifting import CakeFilterBank, build_cake_bank, lift, project

MODELS = ("WC2D", "WC3D", "LHE2D", "LHE3D")


@dataclass(frozen=True)
class ModelParams:
    lam: float = 0.5
    nu: float = 0.5
    alpha: float = 5.0
    sigma_mu: float = 3.0
    sigma_omega: float = 8.0
    sigma_orient: float = 1.0
    dt: float = 0.1
    tau: float = 1e-2
    max_iters: int = 2000
    poly_degree: int = 11
    n_orient: int = 30
    bw: int = 4
    max_dt_halvings: int = 4
    # escape hatch for pure WC experiments; None means beta = 1 + lam
    beta_override: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidParameterError(f"lam must be >= 0, got {self.lam}")
        if not self.alpha > 1:
            raise InvalidParameterError(f"alpha must be > 1, got {self.alpha}")
        for name in ("sigma_mu", "sigma_omega", "sigma_orient", "dt", "tau"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")
        if self.poly_degree < 3 or self.poly_degree % 2 == 0:
            raise InvalidParameterError(f"poly_degree must be odd and >= 3, got {self.poly_degree}")
        if self.n_orient < 2 or self.bw < 1:
            raise InvalidParameterError("n_orient must be >= 2 and bw >= 1")

    @property
    def beta(self) -> float:
        return 1.0 + self.lam if self.beta_override is None else float(self.beta_override)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass
class EvolutionTrace:
    model: str
    updates: list[float] = field(default_factory=list)
    energies: list[float] | None = None
    dts: list[float] = field(default_factory=list)
    converged: bool = False
    poly_fit_error: float | None = None
    poly_interval: float | None = None
    display_scale: float = 1.0
    display_offset: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.updates)


# -- sigmoid family -----------------------------------------------------------


def sigmoid(rho, alpha: float):
    """Piecewise-linear odd sigmoid ``min(1, max(alpha rho, -1))``."""
    return np.clip(alpha * np.asarray(rho, dtype=float), -1.0, 1.0)


def inhibitory_sigmoid(rho, alpha: float):
    return -sigmoid(rho, alpha)


def sigmoid_derivative(rho, alpha: float):
    return np.where(np.abs(np.asarray(rho, dtype=float)) < 1.0 / alpha, alpha, 0.0)


def sigma_primitive(rho, alpha: float):
    """Even primitive of :func:`sigmoid` vanishing at 0."""
    r = np.abs(np.asarray(rho, dtype=float))
    return np.where(r <= 1.0 / alpha, 0.5 * alpha * r**2, r - 0.5 / alpha)


# -- interaction term ---------------------------------------------------------


def _offsets(shape):
    return itertools.product(*(range(n) for n in shape))


def interaction_naive(F, W, alpha: float) -> np.ndarray:
    """Direct summation of ``R_i = sum_j W[i - j] sigmoid(F_i - F_j)``.

    Works on any grid shape; cost is quadratic in the number of cells.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    if F.shape != W.shape:
        raise InvalidParameterError(f"shape mismatch: {F.shape} vs {W.shape}")
    R = np.zeros_like(F)
    axes = tuple(range(F.ndim))
    for d in _offsets(F.shape):
        w = W[d]
        if w != 0.0:
            R += w * sigmoid(F - np.roll(F, d, axis=axes), alpha)
    return R


def interaction_primitive_naive(F, W, alpha: float) -> float:
    """``sum_i sum_j W[i - j] Sigma(F_i - F_j)`` by direct summation."""
    F = np.asarray(F, dtype=float)
    axes = tuple(range(F.ndim))
    total = 0.0
    for d in _offsets(F.shape):
        w = W[d]
        if w != 0.0:
            total += w * float(sigma_primitive(F - np.roll(F, d, axis=axes), alpha).sum())
    return total


def fit_odd_polynomial(alpha: float, degree: int, half_width: float, n_samples: int = 4096):
    """Least-squares odd polynomial fit of the sigmoid on ``[-D, D]``.

    Returns coefficients ``b`` (index = power) of ``p(x) = sum b_n (x/D)^n``
    and the max abs fit error over the sample grid.
    """
    if degree % 2 == 0:
        raise InvalidParameterError(f"polynomial degree must be odd, got {degree}")
    x = np.linspace(-half_width, half_width, n_samples)
    t = x / half_width
    powers = np.arange(1, degree + 1, 2)
    V = t[:, None] ** powers[None, :]
    y = sigmoid(x, alpha)
    sol, *_ = np.linalg.lstsq(V, y, rcond=None)
    b = np.zeros(degree + 1)
    b[powers] = sol
    err = float(np.abs(V @ sol - y).max())
    return b, err


class PolynomialInteraction:
    """Fast interaction term with the sigmoid replaced by an odd polynomial.

    Expanding ``(a_i - a_j)^n`` binomially turns the pairwise sum into
    ``degree + 1`` circular convolutions of powers of the state.  The same
    expansion gives the matching primitive term, so an LHE flow driven by this
    evaluator is the exact gradient flow of :meth:`primitive_sum`-based energy.
    """

    def __init__(self, W, alpha: float, degree: int, half_width: float, center: float = 0.0):
        W = np.asarray(W, dtype=float)
        self.shape = W.shape
        self.w_hat = kernel_spectrum(W)
        self.w_sum = float(W.sum())
        self.alpha = alpha
        self.degree = degree
        self.half_width = float(half_width)
        self.center = float(center)
        self.coeffs, self.fit_error = fit_odd_polynomial(alpha, degree, self.half_width)
        self.error_bound = self.w_sum * self.fit_error
        self._D, self._E = self._tables()
        self._cache = None

    @classmethod
    def for_state(cls, F, W, alpha: float, degree: int, bound: float | None = None):
        """Fit on ``[-2B, 2B]`` where ``B`` bounds the centred state."""
        F = np.asarray(F, dtype=float)
        center = 0.5 * (F.max() + F.min())
        if bound is None:
            bound = 0.5 * (F.max() - F.min())
        return cls(W, alpha, degree, max(2.0 * bound, 1e-12), center)

    def _tables(self):
        # R = sum_{r,q} D[r, q] t^r (W * t^q) and the primitive sum
        # = half_width * sum_{r,q} E[r, q] sum(t^r (W * t^q))
        M = self.degree
        D = np.zeros((M + 2, M + 2))
        E = np.zeros((M + 2, M + 2))
        for n in range(1, M + 1, 2):
            for q in range(n + 1):
                D[n - q, q] += self.coeffs[n] * comb(n, q, exact=True) * (-1) ** q
            m = n + 1
            for q in range(m + 1):
                E[m - q, q] += self.coeffs[n] / m * comb(m, q, exact=True) * (-1) ** q
        return D, E

    def _expand(self, F):
        F = np.asarray(F, dtype=float)
        if F.shape != self.shape:
            raise InvalidParameterError(f"shape mismatch: {F.shape} vs {self.shape}")
        cached = self._cache
        if cached is not None and np.array_equal(cached[0], F):
            return cached[1], cached[2]
        t = ((F - self.center) / self.half_width).ravel()
        top = self.degree + 1
        pw = np.empty((top + 1, t.size))
        pw[0] = 1.0
        for k in range(1, top + 1):
            pw[k] = pw[k - 1] * t
        convs = np.empty_like(pw)
        convs[0] = self.w_sum
        for k in range(1, top + 1):
            convs[k] = convolve_spectrum(pw[k].reshape(self.shape), self.w_hat).ravel()
        self._cache = (F.copy(), pw, convs)
        return pw, convs

    def __call__(self, F) -> np.ndarray:
        pw, convs = self._expand(F)
        A = self._D.T @ pw
        return np.einsum("qi,qi->i", A, convs).reshape(self.shape)

    def polynomial(self, x) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float) / self.half_width, self.coeffs)

    def primitive(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float) / self.half_width
        P = np.zeros_like(x)
        for n in range(1, self.degree + 1, 2):
            P += self.coeffs[n] * x ** (n + 1) / (n + 1)
        return self.half_width * P

    def primitive_sum(self, F) -> float:
        """``sum_i sum_j W[i - j] P(F_i - F_j)`` with ``P`` the polynomial primitive."""
        pw, convs = self._expand(F)
        S = pw @ convs.T
        return self.half_width * float(np.sum(self._E * S))


def interaction_fast(F, W, alpha: float, M: int = 11, bound: float | None = None) -> np.ndarray:
    """Polynomial-expansion approximation of :func:`interaction_naive`.

    The approximation error is at most ``sum(W) * fit_error`` where the fit
    error is taken over ``[-2B, 2B]``; see :class:`PolynomialInteraction`.
    """
    if M % 2 == 0:
        raise InvalidParameterError(f"M must be odd, got {M}")
    return PolynomialInteraction.for_state(F, W, alpha, M, bound)(F)


# -- kernels and right-hand sides ---------------------------------------------


def interaction_kernel(shape, p: ModelParams) -> np.ndarray:
    """Normalised Gaussian interaction kernel for a 2D or 3D state."""
    if len(shape) == 2:
        return gaussian2d(p.sigma_omega, shape[0])
    if len(shape) == 3:
        return gaussian3d(p.sigma_omega, p.sigma_orient, shape[0], shape[2])
    raise InvalidParameterError(f"unsupported state shape {shape}")


def small_kernel(shape, sigma: float) -> np.ndarray:
    """Wrapped Gaussian of equal std on every axis, for tiny probe grids."""
    w = np.ones(())
    for n in shape:
        w = np.multiply.outer(w, wrapped_gaussian_1d(sigma, n))
    return w / w.sum()


def rhs_wc(state, h, p: ModelParams, W=None, sigmoid_fn: Callable | None = None, nu: float | None = None):
    """``-beta a + nu W (*) s(a) + h``: the sigmoid sees the neighbour value alone."""
    a = np.asarray(state, dtype=float)
    h = np.asarray(h, dtype=float)
    if a.shape != h.shape:
        raise InvalidParameterError(f"shape mismatch: {a.shape} vs {h.shape}")
    if W is None:
        W = interaction_kernel(a.shape, p)
    s = sigmoid(a, p.alpha) if sigmoid_fn is None else sigmoid_fn(a, p.alpha)
    nu = p.nu if nu is None else nu
    return -p.beta * a + nu * circular_convolve(s, W) + h


def rhs_lhe(state, h, p: ModelParams, W=None, interaction: Callable | None = None):
    """``-beta a + nu R(a) + h`` in the activation convention."""
    a = np.asarray(state, dtype=float)
    h = np.asarray(h, dtype=float)
    if a.shape != h.shape:
        raise InvalidParameterError(f"shape mismatch: {a.shape} vs {h.shape}")
    if interaction is None:
        if W is None:
            W = interaction_kernel(a.shape, p)
        R = interaction_naive(a, W, p.alpha)
    else:
        R = interaction(a)
    return -p.beta * a + p.nu * R + h


def rhs_lhe2d(f, f0, mu, p: ModelParams, W=None, interaction: Callable | None = None):
    """Right-hand side in image units: ``-(1+lam) f + nu R(f) + mu + lam f0``."""
    f = check_image(f)
    f0 = check_image(f0, name="f0")
    mu = check_image(mu, name="mu")
    if not f.shape == f0.shape == mu.shape:
        raise InvalidParameterError("f, f0 and mu must share a shape")
    # R is shift invariant, so the image-unit form equals the activation form
    return rhs_lhe(f, mu + p.lam * f0, p, W, interaction)


def rhs_lhe3d(F, F0, G0, p: ModelParams, W=None, interaction: Callable | None = None):
    """Volume analogue of :func:`rhs_lhe2d` with ``F0 = L f0`` and ``G0 = L mu``."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 3 or not F.shape == np.shape(F0) == np.shape(G0):
        raise InvalidParameterError("F, F0 and G0 must share an (N, N, K) shape")
    return rhs_lhe(F, np.asarray(G0) + p.lam * np.asarray(F0), p, W, interaction)


def step_explicit(state, rhs_value, dt: float) -> np.ndarray:
    return np.asarray(state, dtype=float) + dt * np.asarray(rhs_value, dtype=float)


# -- energy -------------------------------------------------------------------


def energy_lhe(state, h, p: ModelParams, W=None, interaction: PolynomialInteraction | None = None) -> float:
    """Lyapunov energy of the LHE flow in the activation convention.

    ``(beta-1)/2 |a|^2 + 1/2 |a-h|^2 - nu/2 sum_ij W_ij Sigma(a_i - a_j)``.
    With ``interaction`` given, ``Sigma`` is that evaluator's polynomial
    primitive so the energy matches the flow it drives.
    """
    a = np.asarray(state, dtype=float)
    h = np.asarray(h, dtype=float)
    if interaction is not None:
        pair = interaction.primitive_sum(a)
    else:
        if W is None:
            W = interaction_kernel(a.shape, p)
        pair = interaction_primitive_naive(a, W, p.alpha)
    fidelity = 0.5 * (p.beta - 1.0) * float(np.sum(a * a)) + 0.5 * float(np.sum((a - h) ** 2))
    return fidelity - 0.5 * p.nu * pair


# -- Jacobians ----------------------------------------------------------------


def circulant_matrix(W) -> np.ndarray:
    """Dense matrix ``C[i, j] = W[(i - j) mod shape]`` over flattened indices."""
    W = np.asarray(W, dtype=float)
    shape = W.shape
    idx = np.array(np.unravel_index(np.arange(W.size), shape))
    diff = (idx[:, :, None] - idx[:, None, :]) % np.array(shape)[:, None, None]
    return W[tuple(diff)]


def rhs_jacobian(model: str, state, p: ModelParams, W) -> np.ndarray:
    """Exact Jacobian of the WC or LHE right-hand side (flattened state)."""
    a = np.asarray(state, dtype=float).ravel()
    C = circulant_matrix(W)
    n = a.size
    if model.upper().startswith("WC"):
        J = p.nu * C * sigmoid_derivative(a, p.alpha)[None, :]
    elif model.upper().startswith("LHE"):
        S = C * sigmoid_derivative(a[:, None] - a[None, :], p.alpha)
        J = p.nu * (np.diag(S.sum(axis=1)) - S)
    else:
        raise InvalidParameterError(f"unknown model {model!r}")
    return J - p.beta * np.eye(n)


def _near_kink(model: str, a: np.ndarray, C: np.ndarray, alpha: float, margin: float) -> bool:
    kink = 1.0 / alpha
    if model.upper().startswith("WC"):
        return bool(np.any(np.abs(np.abs(a) - kink) < margin))
    diffs = np.abs(a[:, None] - a[None, :])
    coupled = C > 0
    return bool(np.any(np.abs(diffs[coupled] - kink) < margin))


def jacobian_probe(
    model: str,
    state,
    p: ModelParams,
    W=None,
    rng: np.random.Generator | None = None,
    margin: float = 1e-3,
    max_resample: int = 10,
) -> float:
    """``max |J - J^T|`` of the discrete right-hand side at ``state``.

    States within ``margin`` of a sigmoid kink are jittered (needs ``rng``)
    up to ``max_resample`` times before giving up.
    """
    a = np.asarray(state, dtype=float)
    if a.size > 64:
        raise InvalidParameterError(f"probe states are limited to 64 entries, got {a.size}")
    if W is None:
        W = small_kernel(a.shape, 1.0)
    C = circulant_matrix(W)
    flat = a.ravel().copy()
    attempts = 0
    while _near_kink(model, flat, C, p.alpha, margin):
        if rng is None or attempts >= max_resample:
            raise DegenerateStateError("state lies on a sigmoid kink")
        flat = flat + rng.normal(scale=10 * margin, size=flat.shape)
        attempts += 1
    J = rhs_jacobian(model, flat.reshape(a.shape), p, W)
    return float(np.abs(J - J.T).max())


def mixed_regime_witness(p: ModelParams):
    """Two-pixel WC state with one unit linear and one saturated.

    Returns ``(state, W)`` with ``W`` weighting self and neighbour by 1/2; the
    WC Jacobian asymmetry at this state is ``nu * alpha * W[0, 1]``.
    """
    state = np.array([[0.5 / p.alpha, 2.0 / p.alpha]])
    W = np.array([[0.5, 0.5]])
    return state, W


# -- solver -------------------------------------------------------------------


@dataclass
class _Setup:
    a0: np.ndarray
    h: np.ndarray
    offset: float
    W: np.ndarray
    bank: CakeFilterBank | None


def prepare(model: str, f0, p: ModelParams, bank: CakeFilterBank | None = None) -> _Setup:
    """Initial activation, external input and kernel for ``model``.

    3D inputs are lifts of the 2D ones: ``a0 = L(f0 - 1/2)`` and
    ``h = L(mu + lam f0 - (1 + lam)/2)``, so the per-channel grey level is
    ``1 / (2K)``.
    """
    if model not in MODELS:
        raise InvalidParameterError(f"unknown model {model!r}; choose from {MODELS}")
    f0 = check_image(f0, nominal=True, name="f0")
    N = f0.shape[0]
    mu = local_mean(f0, p.sigma_mu)
    a0 = f0 - 0.5
    h = mu + p.lam * f0 - 0.5 * (1.0 + p.lam)
    if model.endswith("2D"):
        return _Setup(a0, h, 0.5, interaction_kernel(a0.shape, p), None)
    if bank is None:
        bank = build_cake_bank(N, p.n_orient, p.bw)
    elif bank.N != N:
        raise InvalidParameterError(f"bank N={bank.N} does not match image N={N}")
    a0 = lift(a0, bank)
    h = lift(h, bank)
    return _Setup(a0, h, 0.5 / bank.K, interaction_kernel(a0.shape, p), bank)


def _invariant_span(a0: np.ndarray, h: np.ndarray, p: ModelParams, reach: float) -> float:
    # the Euler map keeps a inside [lo, hi] when |R| <= reach and beta dt <= 1
    lo = min(float(a0.min()), (float(h.min()) - abs(p.nu) * reach) / p.beta)
    hi = max(float(a0.max()), (float(h.max()) + abs(p.nu) * reach) / p.beta)
    return hi - lo


def make_fast_interaction(setup: _Setup, p: ModelParams) -> PolynomialInteraction:
    reach = 1.0
    for _ in range(4):
        span = _invariant_span(setup.a0, setup.h, p, reach)
        inter = PolynomialInteraction(setup.W, p.alpha, p.poly_degree, span)
        x = np.linspace(-span, span, 4096)
        new_reach = max(1.0, float(np.abs(inter.polynomial(x)).max()))
        if new_reach <= reach * (1 + 1e-9):
            break
        reach = new_reach
    return inter


def run(
    model: str,
    f0,
    p: ModelParams,
    bank: CakeFilterBank | None = None,
    interaction: str = "fast",
    callback: Callable | None = None,
):
    """Evolve ``model`` from stimulus ``f0`` until the relative update drops below ``tau``.

    Returns ``(image, trace)``.  2D outputs are ``a + 1/2``; 3D outputs are
    projected and affinely rescaled to [0, 1], the map being stored in the
    trace.  ``interaction`` selects the LHE evaluator: ``"fast"`` (polynomial)
    or ``"naive"`` (direct summation, small grids only).
    """
    setup = prepare(model, f0, p, bank)
    is_lhe = model.startswith("LHE")
    trace = EvolutionTrace(model=model, energies=[] if is_lhe else None)

    if is_lhe:
        if interaction == "fast":
            inter = make_fast_interaction(setup, p)
            trace.poly_fit_error = inter.fit_error
            trace.poly_interval = inter.half_width
            energy = lambda a: energy_lhe(a, setup.h, p, interaction=inter)  # noqa: E731
        elif interaction == "naive":
            inter = lambda a: interaction_naive(a, setup.W, p.alpha)  # noqa: E731
            energy = lambda a: energy_lhe(a, setup.h, p, W=setup.W)  # noqa: E731
        else:
            raise InvalidParameterError(f"unknown interaction evaluator {interaction!r}")
        rhs = lambda a: rhs_lhe(a, setup.h, p, interaction=inter)  # noqa: E731
    else:
        w_hat = kernel_spectrum(setup.W)
        rhs = lambda a: -p.beta * a + p.nu * convolve_spectrum(sigmoid(a, p.alpha), w_hat) + setup.h  # noqa: E731

    a = setup.a0
    dt = p.dt
    e_prev = energy(a) if is_lhe else None
    for _ in range(p.max_iters):
        r = rhs(a)
        for _halving in range(p.max_dt_halvings + 1):
            a_new = a + dt * r
            if not is_lhe:
                break
            e_new = energy(a_new)
            if e_new <= e_prev or _halving == p.max_dt_halvings:
                break
            dt *= 0.5
        F_old_norm = np.linalg.norm(a + setup.offset)
        update = float(np.linalg.norm(a_new - a) / F_old_norm) if F_old_norm > 0 else 0.0
        a = a_new
        trace.updates.append(update)
        trace.dts.append(dt)
        if is_lhe:
            trace.energies.append(e_new)
            e_prev = e_new
        if callback is not None:
            callback(len(trace.updates), a, trace)
        if update <= p.tau:
            trace.converged = True
            break

    if setup.bank is None:
        out = a + 0.5
    else:
        out = project(a) + 0.5
        lo, hi = float(out.min()), float(out.max())
        scale = 1.0 / (hi - lo) if hi > lo else 1.0
        trace.display_scale = scale
        trace.display_offset = -lo * scale
        out = out * scale + trace.display_offset
    return out, trace
