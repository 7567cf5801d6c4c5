"""Number-basis integration of the secular master equation.

The populations-and-coherences system

    drho/dt = k-(t) [a rho a+ - (a+a rho + rho a+a)/2]
            + k+(t) [a+ rho a - (a a+ rho + rho a a+)/2]

with k- = Delta + gamma and k+ = Delta - gamma is integrated as written,
signed rates included: the non-Lindblad episodes where k+ < 0 are the
object of study, so nothing is clamped.  Work happens in the interaction
picture (no free-Hamiltonian commutator); number populations and <n> are
picture-independent, rotation-sensitive quadrature observables get the
free rotation re-applied on extraction.

The ladder operators are the truncated N x N matrices, which makes the
generator exactly trace-free on the truncated space; the price is a
distorted top level, guarded by the spill monitor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .coefficients import CoefficientTable
from .errors import (DomainError, IntegratorError, RangeError,
                     TruncationError)

AUDIT_CSV_HEADER = "t,min_eig,trace_err,herm_err"

_HERM_TOL = 1e-10
_DEFAULT_SPILL = 1e-6


@dataclass(frozen=True)
class FockDensityMatrix:
    """Density matrix in the truncated number basis."""

    dim: int
    elements: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.shape != (self.dim, self.dim):
            raise DomainError(f"elements must be {self.dim}x{self.dim}")
        herm = np.max(np.abs(el - el.conj().T))
        if herm > _HERM_TOL:
            raise DomainError(f"matrix not Hermitian (residual {herm:.3e})")
        object.__setattr__(self, "elements", el)

    @property
    def trace_error(self) -> float:
        return abs(self.elements.trace().real - 1.0)

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    @property
    def tail_occupation(self) -> float:
        return float(self.elements[-1, -1].real)

    @property
    def populations(self) -> np.ndarray:
        return self.elements.diagonal().real.copy()

    @property
    def n_mean(self) -> float:
        return float(np.arange(self.dim) @ self.populations)


@dataclass(frozen=True)
class PositivityAudit:
    t: float
    min_eigenvalue: float
    trace_error: float
    hermiticity_error: float


def choose_truncation(nbar: float, tail_tol: float = 1e-8,
                      floor: int = 8) -> int:
    """Smallest N whose thermal tail (nbar/(nbar+1))^N drops below tail_tol."""
    if nbar < 0.0:
        raise DomainError("mean occupation must be >= 0")
    if nbar == 0.0:
        return floor
    n = int(np.ceil(np.log(tail_tol) / np.log(nbar / (nbar + 1.0))))
    return max(floor, n)


def vacuum_density(dim: int) -> FockDensityMatrix:
    return fock_density(0, dim)


def fock_density(k: int, dim: int) -> FockDensityMatrix:
    if not 0 <= k < dim:
        raise DomainError(f"level {k} outside truncation {dim}")
    el = np.zeros((dim, dim), dtype=complex)
    el[k, k] = 1.0
    return FockDensityMatrix(dim=dim, elements=el)


def thermal_density(nbar: float, dim: int) -> FockDensityMatrix:
    if nbar < 0.0:
        raise DomainError("mean occupation must be >= 0")
    if nbar == 0.0:
        return vacuum_density(dim)
    k = np.arange(dim)
    p = (nbar / (nbar + 1.0)) ** k / (nbar + 1.0)
    return FockDensityMatrix(dim=dim,
                             elements=np.diag(p / p.sum()).astype(complex))


def coherent_amplitudes(mean_x: float, mean_p: float,
                        dim: int) -> np.ndarray:
    """Unit-norm number-basis amplitudes of |beta>,
    beta = (mean_x + i mean_p)/sqrt(2)."""
    beta = (mean_x + 1j * mean_p) / np.sqrt(2.0)
    amp = np.zeros(dim, dtype=complex)
    if beta == 0:
        amp[0] = 1.0
        return amp
    k = np.arange(dim)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    amp = np.exp(-0.5 * abs(beta) ** 2 + k * np.log(complex(beta))
                 - 0.5 * log_fact)
    norm = np.linalg.norm(amp)
    if norm**2 < 1.0 - 1e-9:
        raise DomainError(f"coherent amplitude spills truncation {dim} "
                          f"(captured norm^2 {norm**2:.6f})")
    return amp / norm


def coherent_density(mean_x: float, mean_p: float,
                     dim: int) -> FockDensityMatrix:
    """|beta><beta| with beta = (mean_x + i mean_p)/sqrt(2)."""
    amp = coherent_amplitudes(mean_x, mean_p, dim)
    return FockDensityMatrix(dim=dim, elements=np.outer(amp, amp.conj()))


def _channel_weights(dim: int):
    m = np.arange(dim, dtype=float)
    sq = np.sqrt(np.outer(m[1:], m[1:]))          # sqrt(m n), m,n >= 1
    w_minus = np.add.outer(m, m)                  # m + n
    up = m + 1.0
    up[-1] = 0.0                                  # truncated a a+ top level
    w_plus = np.add.outer(up, up)
    return sq, w_minus, w_plus


def integrate_secular(rho0: FockDensityMatrix, table: CoefficientTable,
                      t_grid: Sequence[float],
                      spill_threshold: float = _DEFAULT_SPILL,
                      rtol: float = 1e-9, atol: float = 1e-12,
                      ) -> Tuple[List[FockDensityMatrix],
                                 List[PositivityAudit]]:
    """Integrate over t_grid (starting at rho0's time, within the table).

    Returns the states at the grid times and one audit per state.  Raises
    TruncationError at the first grid time whose edge population exceeds
    spill_threshold, IntegratorError if step control fails.
    """
    tg = np.asarray(t_grid, dtype=float)
    if tg.ndim != 1 or len(tg) < 1 or np.any(np.diff(tg) <= 0.0):
        raise DomainError("t_grid must be strictly increasing")
    if tg[0] < rho0.t:
        raise DomainError("t_grid starts before the initial state")
    if tg[0] < table.grid[0] or tg[-1] > table.t_max:
        raise RangeError(f"t_grid outside table range [0, {table.t_max}]")

    dim = rho0.dim
    sq, w_minus, w_plus = _channel_weights(dim)
    delta_s = table._splines["delta"]
    gamma_s = table._splines["gamma"]
    n2 = dim * dim

    def rhs(t, y):
        rho = (y[:n2] + 1j * y[n2:]).reshape(dim, dim)
        d = float(delta_s(t))
        g = float(gamma_s(t))
        km = d + g
        kp = d - g
        out = np.zeros_like(rho)
        out[:-1, :-1] += km * sq * rho[1:, 1:]
        out -= (0.5 * km) * w_minus * rho
        out[1:, 1:] += kp * sq * rho[:-1, :-1]
        out -= (0.5 * kp) * w_plus * rho
        return np.concatenate((out.real.ravel(), out.imag.ravel()))

    y0 = np.concatenate((rho0.elements.real.ravel(),
                         rho0.elements.imag.ravel()))
    t0 = float(rho0.t)
    t_eval = tg if tg[0] > t0 else tg[1:]
    sol = solve_ivp(rhs, (t0, tg[-1]), y0, method="RK45", t_eval=t_eval,
                    rtol=rtol, atol=atol) if tg[-1] > t0 else None
    if sol is not None and not sol.success:
        raise IntegratorError(f"step control failed: {sol.message}")

    states = []
    if tg[0] == t0:
        states.append(FockDensityMatrix(dim=dim, elements=rho0.elements,
                                        t=t0))
    if sol is not None:
        for k in range(sol.y.shape[1]):
            y = sol.y[:, k]
            rho = (y[:n2] + 1j * y[n2:]).reshape(dim, dim)
            rho = 0.5 * (rho + rho.conj().T)  # shed integrator roundoff
            states.append(FockDensityMatrix(dim=dim, elements=rho,
                                            t=float(sol.t[k])))
    for st in states:
        if st.tail_occupation > spill_threshold:
            raise TruncationError(
                f"edge population {st.tail_occupation:.3e} exceeded "
                f"{spill_threshold:.1e} at t = {st.t:.6g}", time=st.t)
    return states, audit_positivity(states)


def audit_positivity(states: Sequence[FockDensityMatrix]
                     ) -> List[PositivityAudit]:
    """Full Hermitian eigendecomposition per state."""
    out = []
    for st in states:
        eigs = np.linalg.eigvalsh(st.elements)
        out.append(PositivityAudit(t=st.t,
                                   min_eigenvalue=float(eigs[0]),
                                   trace_error=st.trace_error,
                                   hermiticity_error=st.hermiticity_error))
    return out


def heating_function(states: Sequence[FockDensityMatrix]) -> np.ndarray:
    """<n>(t) = sum_k k rho_kk over the state series."""
    return np.array([st.n_mean for st in states])


def quadrature_moments(state: FockDensityMatrix, rotation_angle: float = 0.0
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Mean vector and symmetrized covariance of (X, P).

    rotation_angle re-applies the free rotation (omega0 * t) that the
    interaction picture removed; 0 returns interaction-picture moments.
    """
    rho = state.elements
    dim = state.dim
    root = np.sqrt(np.arange(1, dim))
    # tr(rho a) = sum_m sqrt(m) rho_{m,m-1} (subdiagonal)
    a_mean = complex(root @ rho.diagonal(-1))
    mean = np.sqrt(2.0) * np.array([a_mean.real, a_mean.imag])

    k = np.arange(dim)
    n_mean = float(k @ rho.diagonal().real)
    # tr(rho a^2) = sum_m sqrt(m(m-1)) rho_{m,m-2}
    aa = complex(np.sqrt(k[2:] * (k[2:] - 1.0)) @ rho.diagonal(-2))
    # <X^2> = Re<a^2> + <n> + 1/2, <P^2> = -Re<a^2> + <n> + 1/2,
    # <XP>_sym = Im<a^2>
    xx = aa.real + n_mean + 0.5
    pp = -aa.real + n_mean + 0.5
    xp = aa.imag
    second = np.array([[xx, xp], [xp, pp]])
    cov = second - np.outer(mean, mean)
    c = np.cos(rotation_angle)
    s = np.sin(rotation_angle)
    rot = np.array([[c, s], [-s, c]])
    return rot @ mean, rot @ cov @ rot.T


def audits_to_csv(audits: Sequence[PositivityAudit], path) -> None:
    rows = np.array([[a.t, a.min_eigenvalue, a.trace_error,
                      a.hermiticity_error] for a in audits])
    np.savetxt(path, rows, fmt="%.17g", delimiter=",",
               header=AUDIT_CSV_HEADER, comments="")


def state_to_csv(state: FockDensityMatrix, path) -> None:
    """Row-major flattened elements, one re,im pair per line."""
    flat = state.elements.ravel()
    rows = np.column_stack((flat.real, flat.imag))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",",
               header=f"N={state.dim},t={state.t!r}\nre,im", comments="")
