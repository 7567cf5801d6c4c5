"""Reservoir spectral density and memory kernels.

Model: Ohmic spectral density with a Lorentz-Drude cutoff,

    J(w) = (2/pi) * w * wc^2 / (wc^2 + w^2),

thermal occupation n(w) = 1/(exp(hbar w/kT) - 1), and the two bath memory
kernels entering the time-local coefficients, defined over the finite
frequency window [0, Omega_max], Omega_max = max(50 wc, 50 kT/hbar):

    noise:       kappa(tau) = 2 alpha^2 Int_0^Omega J(w) (n(w)+1/2) cos(w tau) dw
    dissipation: mu(tau)    =   alpha^2 Int_0^Omega J(w) sin(w tau) dw.

The window is part of the model, not a numerical shortcut: it caps the
logarithmic vacuum divergence of kappa at tau = 0 and makes mu vanish
linearly there, which fixes the short-time laws (Delta ~ kappa(0) t,
gamma ~ t^3). Above the window edge the integrand tails are known
analytically, so each kernel is evaluated as (improper closed form) minus
(vacuum tail), never by brute oscillatory quadrature: at the hot, long-time
parameter sets a direct adaptive rule would need ~Omega*t ~ 1e8
oscillations per sample. The thermal part needs no tail correction
(occupation at the window edge is < e^-50).

All frequencies are angular (rad/s) and hbar = 1: kernels carry units of
(rad/s)^2, temperature enters only through kt = k_B T / hbar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import exp1, expi, zeta

from .constants import TWO_PI, angular_to_kelvin, kelvin_to_angular
from .errors import DomainError
from .quadrature import adaptive_gk

ArrayLike = Union[float, np.ndarray]

WINDOW_FACTOR = 50.0
# exp(-48) ~ 1.4e-21: occupation beyond theta_cut*kt is numerically zero
THETA_CUT = 48.0

SPECTRAL_FAMILIES = ("ohmic-lorentz-drude",)


@dataclass(frozen=True)
class ReservoirSpec:
    """Oscillator-reservoir parameters.

    omega0, omega_c in rad/s, temperature in kelvin, alpha dimensionless.
    kt = k_B T / hbar (rad/s) is derived once at construction.
    """

    omega0: float
    alpha: float
    omega_c: float
    temperature: float
    family: str = "ohmic-lorentz-drude"
    kt: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.omega0 <= 0.0:
            raise DomainError("omega0 must be > 0")
        if self.omega_c <= 0.0:
            raise DomainError("omega_c must be > 0")
        if self.alpha < 0.0:
            raise DomainError("alpha must be >= 0")
        if self.temperature < 0.0:
            raise DomainError("temperature must be >= 0 K")
        if self.family not in SPECTRAL_FAMILIES:
            raise DomainError(f"unknown spectral family {self.family!r}")
        object.__setattr__(self, "kt", kelvin_to_angular(self.temperature))

    @classmethod
    def from_kt(cls, omega0: float, alpha: float, omega_c: float,
                kt: float) -> "ReservoirSpec":
        """Build a spec from kT/hbar given directly in rad/s."""
        if kt < 0.0:
            raise DomainError("kt must be >= 0")
        return cls(omega0=omega0, alpha=alpha, omega_c=omega_c,
                   temperature=angular_to_kelvin(kt))

    @classmethod
    def from_ratio(cls, omega0: float, alpha: float, r: float,
                   temperature: float) -> "ReservoirSpec":
        """Build a spec from the cutoff ratio r = omega_c / omega0."""
        if r <= 0.0:
            raise DomainError("r must be > 0")
        return cls(omega0=omega0, alpha=alpha, omega_c=r * omega0,
                   temperature=temperature)

    @property
    def r(self) -> float:
        return self.omega_c / self.omega0

    @property
    def nbar0(self) -> float:
        """Thermal occupation at the oscillator frequency."""
        return thermal_occupation(self.omega0, self.kt)


@dataclass(frozen=True)
class KernelSample:
    """Noise and dissipation kernels on a common tau grid."""

    tau: np.ndarray
    noise: np.ndarray
    dissipation: np.ndarray
    frequency_window: float


def eval_spectral_density(omega: ArrayLike, omega_c: float) -> ArrayLike:
    """J(w) = (2/pi) w wc^2 / (wc^2 + w^2) for w >= 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise DomainError("spectral density defined for omega >= 0")
    out = (2.0 / np.pi) * w * omega_c**2 / (omega_c**2 + w**2)
    return out if out.ndim else float(out)


def thermal_occupation(omega: ArrayLike, kt: float) -> ArrayLike:
    """Bose-Einstein occupation 1/(exp(w/kt) - 1); zero at kt = 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0.0):
        raise DomainError("thermal occupation defined for omega > 0")
    if kt < 0.0:
        raise DomainError("kt must be >= 0")
    if kt == 0.0:
        out = np.zeros_like(w)
    else:
        # w/kt beyond the exp range correctly underflows to zero occupation
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(w / kt)
    return out if out.ndim else float(out)


def frequency_window(spec: ReservoirSpec) -> float:
    """Upper edge Omega_max of the quadrature window."""
    return WINDOW_FACTOR * max(spec.omega_c, spec.kt)


# ---------------------------------------------------------------------------
# dimensionless Lorentz transforms
#   V(x) = Int_0^inf u cos(xu)/(1+u^2) du = (exp(x)E1(x) - exp(-x)Ei(x))/2
#   W(x) = Int_0^inf   sin(xu)/(1+u^2) du = (exp(x)E1(x) + exp(-x)Ei(x))/2
# V diverges like -ln(x) at 0; both evaluated by asymptotic series for
# large x where exp(x) would overflow or lose accuracy.
# ---------------------------------------------------------------------------

_ASYM_SWITCH = 45.0
# (2m+1)! and (2m)! coefficients of the asymptotic tails
_V_COEF = np.array([1.0, 6.0, 120.0, 5040.0, 362880.0, 39916800.0])
_W_COEF = np.array([1.0, 2.0, 24.0, 720.0, 40320.0, 3628800.0])


def _lorentz_transforms(x: np.ndarray):
    """Return (V(x), W(x)) for x >= 0, vectorized; V(0) = inf, W(0) = 0."""
    x = np.asarray(x, dtype=float)
    v = np.empty_like(x)
    w = np.empty_like(x)
    zero = x == 0.0
    if np.any(zero):
        v[zero] = np.inf
        w[zero] = 0.0
    small = (x <= _ASYM_SWITCH) & ~zero
    if np.any(small):
        xs = x[small]
        a = np.exp(xs) * exp1(xs)
        b = np.exp(-xs) * expi(xs)
        v[small] = 0.5 * (a - b)
        w[small] = 0.5 * (a + b)
    big = x > _ASYM_SWITCH
    if np.any(big):
        inv2 = 1.0 / (x[big] * x[big])
        pv = np.zeros_like(inv2)
        pw = np.zeros_like(inv2)
        for cv, cw in zip(_V_COEF[::-1], _W_COEF[::-1]):
            pv = (pv + cv) * inv2
            pw = pw * inv2 + cw
        v[big] = -pv
        w[big] = pw * inv2 * x[big]  # = sum (2m)!/x^(2m+1)
    return v, w


def vacuum_cos_transform(omega_c: float, tau: np.ndarray) -> np.ndarray:
    """Int_0^inf J(w) cos(w tau) dw for tau > 0 (improper value)."""
    x = omega_c * np.asarray(tau, dtype=float)
    v, _ = _lorentz_transforms(x)
    return (2.0 / np.pi) * omega_c**2 * v


def vacuum_cos_window_zero(spec: ReservoirSpec) -> float:
    """Window value Int_0^Omega J(w) dw at tau = 0."""
    ratio = frequency_window(spec) / spec.omega_c
    return (1.0 / np.pi) * spec.omega_c**2 * np.log1p(ratio * ratio)


def _window_tail(spec: ReservoirSpec, tau: np.ndarray):
    """(T_c, T_s) = Int_Omega^inf w {cos,sin}(w tau)/(w^2+wc^2) dw, tau > 0.

    Exact via complex exponential integrals while exp(wc tau) is safe;
    for wc tau > 45 the phase Omega tau exceeds 2250 and four terms of the
    integration-by-parts series are already at machine precision.
    """
    wc = spec.omega_c
    om = frequency_window(spec)
    x = wc * tau
    ph = om * tau
    tc = np.empty_like(tau)
    ts = np.empty_like(tau)
    small = x <= _ASYM_SWITCH
    if np.any(small):
        xs = x[small]
        ps = ph[small]
        g = 0.5 * (np.exp(xs) * exp1(xs - 1j * ps)
                   + np.exp(-xs) * exp1(-xs - 1j * ps))
        tc[small] = g.real
        ts[small] = g.imag
    big = ~small
    if np.any(big):
        s = np.sin(ph[big])
        c = np.cos(ph[big])
        tb = tau[big]
        a2 = wc * wc
        d = om * om + a2
        f0 = om / d
        f1 = (a2 - om * om) / d**2
        f2 = 2.0 * om * (om * om - 3.0 * a2) / d**3
        f3 = -6.0 * (om**4 - 6.0 * a2 * om * om + a2 * a2) / d**4
        tc[big] = -f0 * s / tb - f1 * c / tb**2 + f2 * s / tb**3 \
            + f3 * c / tb**4
        ts[big] = f0 * c / tb - f1 * s / tb**2 - f2 * c / tb**3 \
            + f3 * s / tb**4
    return tc, ts


# ---------------------------------------------------------------------------
# thermal transforms C_n(tau) = Int J n cos, S_n(tau) = Int J n sin.
# Two branches:
#   * nu_1 = 2 pi kt > 2 wc: Matsubara pole expansion (high temperature);
#     safe because the cot(theta_c) pole at wc = nu_k cannot occur.
#   * otherwise: direct Gauss-Legendre panels over [0, THETA_CUT*kt]; the
#     oscillation count wc*tau stays modest in this low-temperature branch.
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_CHUNK = 2 ** 22  # cap on temporary matrix size (elements)


def _use_matsubara(spec: ReservoirSpec) -> bool:
    return TWO_PI * spec.kt > 2.0 * spec.omega_c


def _thermal_zero_moment(spec: ReservoirSpec) -> float:
    """C_n(0) = Int_0^inf J(w) n(w) dw by adaptive quadrature."""
    if spec.kt == 0.0:
        return 0.0
    hi = THETA_CUT * spec.kt
    # integrand -> (2/pi) kt at w -> 0; interior quadrature nodes never
    # touch the endpoint so the open lower limit is safe
    val, _ = adaptive_gk(
        lambda w: eval_spectral_density(w, spec.omega_c)
        * thermal_occupation(w, spec.kt), 0.0, hi, rtol=1e-10)
    return val


def _matsubara_cos(spec: ReservoirSpec, tau: np.ndarray) -> np.ndarray:
    """C_n on the Matsubara branch, tau > 0 strictly."""
    kt, wc = spec.kt, spec.omega_c
    theta_c = wc / (2.0 * kt)
    nu1 = TWO_PI * kt
    full = wc**2 / np.tan(theta_c) * np.exp(-wc * tau)
    order = np.argsort(tau)
    tsorted = tau[order]
    acc = np.zeros_like(tsorted)
    kmax = int(np.ceil(THETA_CUT / (nu1 * tsorted[0])))
    k0 = 1
    while k0 <= kmax:
        k1 = min(kmax, k0 + max(1, _CHUNK // max(1, len(tsorted))) - 1)
        ks = np.arange(k0, k1 + 1, dtype=float)
        nus = nu1 * ks
        # entries with nu_k * tau > THETA_CUT contribute < 1e-21 relatively
        limit = np.searchsorted(tsorted, THETA_CUT / nus[0], side="right")
        if limit == 0:
            break
        tt = tsorted[:limit]
        terms = (4.0 * kt * nus * wc**2 / (nus**2 - wc**2))[:, None] \
            * np.exp(-np.outer(nus, tt))
        acc[:limit] += terms.sum(axis=0)
        k0 = k1 + 1
    full += acc[np.argsort(order)]
    vac = vacuum_cos_transform(wc, tau)
    return 0.5 * (full - vac)


def _matsubara_sin(spec: ReservoirSpec, tau: np.ndarray) -> np.ndarray:
    """S_n on the Matsubara branch, tau > 0 strictly."""
    kt, wc = spec.kt, spec.omega_c
    beta = 1.0 / kt
    theta_c = wc / (2.0 * kt)
    nu1 = TWO_PI * kt
    _, w_wc = _lorentz_transforms(wc * tau)
    out = (2.0 * kt / np.pi) * wc * w_wc - 0.5 * wc**2 * np.exp(-wc * tau)
    # sum_k (nu_k W(nu_k tau) - wc W(wc tau)) / (nu_k^2 - wc^2), tail of the
    # first piece approximated by W(x) ~ 1/x + 2/x^3 with exact remainder sums
    s_tot = beta * (1.0 / theta_c - 1.0 / np.tan(theta_c)) / (4.0 * wc)
    order = np.argsort(tau)
    tsorted = tau[order]
    ksum = np.zeros_like(tsorted)
    kcut = np.maximum(4, np.ceil(30.0 / (nu1 * tsorted)).astype(int))
    kmax = int(kcut.max())
    k0 = 1
    while k0 <= kmax:
        k1 = min(kmax, k0 + max(1, _CHUNK // max(1, len(tsorted))) - 1)
        ks = np.arange(k0, k1 + 1, dtype=float)
        nus = nu1 * ks
        active = kcut >= k0
        if not np.any(active):
            break
        tt = tsorted[active]
        _, wmat = _lorentz_transforms(np.outer(nus, tt))
        denom = (nus**2 - wc**2)[:, None]
        mask = ks[:, None] <= kcut[active][None, :]
        ksum[active] += np.where(mask, nus[:, None] * wmat / denom, 0.0).sum(axis=0)
        k0 = k1 + 1
    # tail over k > K with W(x) = 1/x + 2/x^3 + 24/x^5 + O(x^-7):
    #   T_m = sum_{k>K} nu_k^(-2(m-1)) / (nu_k^2 - wc^2)
    # expanded geometrically in (wc/nu_k)^2 against Hurwitz zetas; the
    # series is positive so there is no cancellation, and nu_{K+1} >= 5 nu1
    # > 10 wc keeps the ratio below 1e-2. Differenced forms lose ~11
    # digits here and get amplified by 1/tau^5.
    tails = np.zeros((3, len(tsorted)))
    for m in (1, 2, 3):
        factor = np.full_like(tsorted, nu1 ** (-2.0 * m))
        for j in range(12):
            tails[m - 1] += factor * zeta(2.0 * (m + j), kcut + 1.0)
            factor *= (wc / nu1) ** 2
    ksum += tails[0] / tsorted + 2.0 * tails[1] / tsorted**3 \
        + 24.0 * tails[2] / tsorted**5
    corr = (4.0 * kt / np.pi) * wc**2 * (ksum - wc * w_wc[order] * s_tot)
    out += corr[np.argsort(order)]
    return out


def _direct_panels(spec: ReservoirSpec, tau_max: float):
    """Gauss-Legendre nodes/weights over [0, THETA_CUT*kt].

    Geometric edges (doubling from wc/4) resolve the Lorentzian knee even
    when kt >> wc; each segment is then split so a subpanel spans at most
    ~4 radians of the cos/sin phase at tau_max.
    """
    hi = THETA_CUT * spec.kt
    scale_edges = [0.0, hi]
    s = 0.25 * min(spec.omega_c, hi)
    while s < hi:
        scale_edges.append(s)
        s *= 2.0
    scale_edges = np.array(sorted(set(scale_edges)))
    pieces = []
    for a, b in zip(scale_edges[:-1], scale_edges[1:]):
        m = max(2, int(np.ceil(1.5 * (b - a) * tau_max / TWO_PI)))
        pieces.append(np.linspace(a, b, m + 1)[:-1])
    edges = np.append(np.concatenate(pieces), hi)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    f = eval_spectral_density(nodes, spec.omega_c) \
        * thermal_occupation(nodes, spec.kt) * weights
    return nodes, f


def _direct_thermal(spec: ReservoirSpec, tau: np.ndarray, kind: str) -> np.ndarray:
    nodes, f = _direct_panels(spec, float(tau.max()))
    osc = np.cos if kind == "cos" else np.sin
    out = np.empty_like(tau)
    step = max(1, _CHUNK // max(1, len(nodes)))
    for i in range(0, len(tau), step):
        block = tau[i:i + step]
        out[i:i + step] = osc(np.outer(block, nodes)) @ f
    return out


def _thermal_positive(spec: ReservoirSpec, tau: np.ndarray, kind: str) -> np.ndarray:
    """Dispatch strictly positive tau between the two evaluation branches.

    On the Matsubara branch the pole sum needs ~THETA_CUT/(nu_1 tau) terms,
    so very small tau fall back to direct panels (few oscillations there).
    """
    if not _use_matsubara(spec):
        return _direct_thermal(spec, tau, kind)
    nu1 = TWO_PI * spec.kt
    tiny = nu1 * tau < 0.05
    out = np.empty_like(tau)
    if np.any(tiny):
        out[tiny] = _direct_thermal(spec, tau[tiny], kind)
    rest = ~tiny
    if np.any(rest):
        fn = _matsubara_cos if kind == "cos" else _matsubara_sin
        out[rest] = fn(spec, tau[rest])
    return out


def thermal_cos_transform(spec: ReservoirSpec, tau: ArrayLike) -> ArrayLike:
    """C_n(tau) = Int_0^inf J(w) n(w) cos(w tau) dw (even in tau)."""
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    at = np.abs(t)
    out = np.zeros_like(at)
    if spec.kt > 0.0:
        zero = at == 0.0
        if np.any(zero):
            out[zero] = _thermal_zero_moment(spec)
        pos = ~zero
        if np.any(pos):
            out[pos] = _thermal_positive(spec, at[pos], "cos")
    return out if np.ndim(tau) else float(out[0])


def thermal_sin_transform(spec: ReservoirSpec, tau: ArrayLike) -> ArrayLike:
    """S_n(tau) = Int_0^inf J(w) n(w) sin(w tau) dw (odd in tau)."""
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    at = np.abs(t)
    out = np.zeros_like(at)
    if spec.kt > 0.0:
        pos = at > 0.0
        if np.any(pos):
            out[pos] = _thermal_positive(spec, at[pos], "sin")
    out *= np.sign(t)
    return out if np.ndim(tau) else float(out[0])


def noise_kernel(spec: ReservoirSpec, tau: ArrayLike) -> ArrayLike:
    """kappa(tau) over the model's frequency window; even in tau."""
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    at = np.abs(t)
    out = np.empty_like(at)
    zero = at == 0.0
    pos = ~zero
    if np.any(pos):
        tc, _ = _window_tail(spec, at[pos])
        v, _ = _lorentz_transforms(spec.omega_c * at[pos])
        out[pos] = (2.0 / np.pi) * spec.omega_c**2 * (v - tc)
    if np.any(zero):
        out[zero] = vacuum_cos_window_zero(spec)
    if spec.kt > 0.0:
        out += 2.0 * thermal_cos_transform(spec, at)
    out *= spec.alpha**2
    return out if np.ndim(tau) else float(out[0])


def dissipation_kernel(spec: ReservoirSpec, tau: ArrayLike) -> ArrayLike:
    """mu(tau) over the model's frequency window; odd, zero at 0.

    The improper sine transform is exactly alpha^2 wc^2 sgn(tau)
    exp(-wc |tau|); the window subtracts its above-edge tail, which makes
    mu continuous (linear) through tau = 0 instead of jumping. Temperature
    independent.
    """
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    at = np.abs(t)
    out = np.zeros_like(at)
    pos = at > 0.0
    if np.any(pos):
        _, ts = _window_tail(spec, at[pos])
        out[pos] = spec.omega_c**2 * np.exp(-spec.omega_c * at[pos]) \
            - (2.0 / np.pi) * spec.omega_c**2 * ts
    out *= spec.alpha**2 * np.sign(t)
    return out if np.ndim(tau) else float(out[0])


def sample_kernels(spec: ReservoirSpec, tau: np.ndarray) -> KernelSample:
    """Evaluate both kernels on a tau grid."""
    tau = np.asarray(tau, dtype=float)
    return KernelSample(
        tau=tau,
        noise=np.atleast_1d(noise_kernel(spec, tau)),
        dissipation=np.atleast_1d(dissipation_kernel(spec, tau)),
        frequency_window=frequency_window(spec),
    )
