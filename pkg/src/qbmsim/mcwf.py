"""Monte Carlo wave-function unraveling of the secular master equation.

Jump channels a at rate k-(t) = Delta + gamma and a+ at rate
k+(t) = Delta - gamma.  Valid only while both rates are nonnegative
(Lindblad-type region); negative rates raise RegimeError pointing at the
deterministic number-basis integrator.

The no-jump drift is diagonal in the number basis, so each substep applies
the exact decay exp(-dt (k- k + k+ (k+1))/2) with rates interpolated at the
substep midpoint; a uniform draw against the surviving norm decides the
jump, a second draw picks the channel weighted by the pre-step expectation
values.  Per-trajectory Philox streams are spawned from the master seed,
trajectories run in fixed blocks of 1024, and block partial sums are
reduced in block order, which makes the estimate bit-identical for any
thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .coefficients import CoefficientTable, RegimeClass, classify_regime
from .errors import DomainError, RangeError, RegimeError

ENSEMBLE_CSV_HEADER = "t,n_mean,std_err"

_BLOCK = 1024
_STEP_BUDGET = 1e-2
_NORM_TOL = 1e-10


@dataclass(frozen=True)
class Trajectory:
    """Single unraveling record."""

    seed: int
    jump_log: List[Tuple[float, str]]
    final_state: np.ndarray

    def __post_init__(self):
        norm = np.linalg.norm(self.final_state)
        if abs(norm - 1.0) > _NORM_TOL:
            raise DomainError(f"trajectory state norm {norm} drifted")


@dataclass(frozen=True)
class EnsembleEstimate:
    """Ensemble mean occupation with per-point standard errors."""

    t_grid: np.ndarray
    n_mean: np.ndarray
    std_err: np.ndarray
    n_traj: int
    master_seed: int
    jumps_down_mean: float = 0.0
    jumps_up_mean: float = 0.0

    def to_csv(self, path) -> None:
        rows = np.column_stack((self.t_grid, self.n_mean, self.std_err))
        np.savetxt(path, rows, fmt="%.17g", delimiter=",",
                   header=ENSEMBLE_CSV_HEADER, comments="")


def vacuum_vector(dim: int) -> np.ndarray:
    return fock_vector(0, dim)


def fock_vector(k: int, dim: int) -> np.ndarray:
    if not 0 <= k < dim:
        raise DomainError(f"level {k} outside truncation {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[k] = 1.0
    return psi


def _substep_plan(table: CoefficientTable, t_grid: np.ndarray,
                  n0: float, step_safety: float
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Midpoint times, step sizes, and sample indices for the walk.

    The step cap enforces dt * (k- <n> + k+ (<n>+1)) <= 1e-2 with <n>
    bounded by the secular mean-occupation solution over the grid.
    """
    vals = table.values_at(t_grid)
    decay = np.exp(-vals["big_gamma"])
    n_secular = decay * (n0 + 0.5) + vals["delta_gamma_int"] - 0.5
    n_max = max(float(np.max(n_secular)), n0, 0.0)
    km = vals["delta"] + vals["gamma"]
    kp = vals["delta"] - vals["gamma"]
    rate = float(np.max(km * n_max + kp * (n_max + 1.0)))
    cap = np.inf if rate <= 0.0 else _STEP_BUDGET / (rate * step_safety)

    mids = []
    sizes = []
    sample_idx = [0]
    total = 0
    for a, b in zip(t_grid[:-1], t_grid[1:]):
        nsub = max(1, int(np.ceil((b - a) / cap))) if np.isfinite(cap) else 1
        edges = np.linspace(a, b, nsub + 1)
        mids.append(0.5 * (edges[:-1] + edges[1:]))
        sizes.append(np.diff(edges))
        total += nsub
        sample_idx.append(total)
    return (np.concatenate(mids), np.concatenate(sizes),
            np.array(sample_idx))


def _run_block(psi0: np.ndarray, n_block: int, seeds, decay: np.ndarray,
               km_mid: np.ndarray, kp_mid: np.ndarray,
               mids: np.ndarray, sizes: np.ndarray,
               sample_idx: np.ndarray, record_events: bool):
    """Walk one block of trajectories; returns per-sample partial sums."""
    dim = len(psi0)
    n_steps = len(mids)
    draws = np.empty((n_block, 2, n_steps))
    for i, seq in enumerate(seeds):
        draws[i] = np.random.Generator(np.random.Philox(seq)).random(
            (2, n_steps))

    psi = np.tile(psi0, (n_block, 1))
    k_arr = np.arange(dim, dtype=float)
    root_dn = np.sqrt(k_arr[1:])       # a:  psi'_k = sqrt(k+1) psi_{k+1}
    root_up = np.sqrt(k_arr[1:])       # a+: psi'_k = sqrt(k)   psi_{k-1}

    s1 = np.zeros(len(sample_idx))
    s2 = np.zeros(len(sample_idx))
    jumps = np.zeros(2)
    events: List[List[Tuple[float, str]]] = [[] for _ in range(n_block)] \
        if record_events else []

    def sample(slot):
        n_vals = np.einsum("bk,k->b", np.abs(psi) ** 2, k_arr)
        s1[slot] += n_vals.sum()
        s2[slot] += (n_vals**2).sum()

    sample(0)
    slot = 1
    for step in range(n_steps):
        occ = np.abs(psi) ** 2
        n_pre = np.einsum("bk,k->b", occ, k_arr)
        w_dn = km_mid[step] * n_pre
        w_up = kp_mid[step] * (n_pre + 1.0)

        tilde = psi * decay[step]
        p_ng = np.einsum("bk,bk->b", tilde.real, tilde.real) \
            + np.einsum("bk,bk->b", tilde.imag, tilde.imag)
        jump = draws[:, 0, step] > p_ng
        w_tot = w_dn + w_up
        jump &= w_tot > 0.0

        if np.any(jump):
            idx = np.nonzero(jump)[0]
            down = draws[idx, 1, step] * w_tot[idx] < w_dn[idx]
            sub = psi[idx]
            new = np.zeros_like(sub)
            new[down, :-1] = sub[down, 1:] * root_dn
            new[~down, 1:] = sub[~down, :-1] * root_up
            norms = np.linalg.norm(new, axis=1)
            if np.any(norms == 0.0):
                raise DomainError("jump produced a null state; "
                                  "truncation too small")
            psi[idx] = new / norms[:, None]
            jumps[0] += int(np.sum(down))
            jumps[1] += int(len(idx) - np.sum(down))
            if record_events:
                for row, isdn in zip(idx, down):
                    events[row].append(
                        (float(mids[step]), "down" if isdn else "up"))
        keep = ~jump
        psi[keep] = tilde[keep] / np.sqrt(p_ng[keep])[:, None]

        if slot < len(sample_idx) and step + 1 == sample_idx[slot]:
            sample(slot)
            slot += 1
    return s1, s2, jumps, events, psi


def run_ensemble(psi0: np.ndarray, table: CoefficientTable,
                 t_grid: Sequence[float], n_traj: int, master_seed: int,
                 threads: int = 1, step_safety: float = 2.0
                 ) -> EnsembleEstimate:
    """Ensemble estimate of <n>(t); bit-reproducible for fixed inputs.

    threads only distributes whole blocks; it cannot change the result.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim != 1 or len(psi0) < 2:
        raise DomainError("psi0 must be a state vector")
    if abs(np.linalg.norm(psi0) - 1.0) > _NORM_TOL:
        raise DomainError("psi0 must be normalized")
    if n_traj < 2:
        raise DomainError("need at least two trajectories")
    tg = np.asarray(t_grid, dtype=float)
    if tg.ndim != 1 or len(tg) < 2 or np.any(np.diff(tg) <= 0.0):
        raise DomainError("t_grid must be strictly increasing")
    if tg[0] < table.grid[0] or tg[-1] > table.t_max:
        raise RangeError(f"t_grid outside table range [0, {table.t_max}]")

    report = classify_regime(table)
    if report.classification is not RegimeClass.LINDBLAD_TYPE:
        raise RegimeError(
            "table has negative decay rates (non-Lindblad region); the "
            "standard unraveling does not apply there, use the "
            "number-basis integrator instead "
            f"(first violation near t = {report.first_violation_time})")

    n0 = float(np.arange(len(psi0)) @ np.abs(psi0) ** 2)
    mids, sizes, sample_idx = _substep_plan(table, tg, n0, step_safety)
    vals = table.values_at(mids)
    km_mid = vals["delta"] + vals["gamma"]
    kp_mid = vals["delta"] - vals["gamma"]
    if np.any(km_mid < 0.0) or np.any(kp_mid < 0.0):
        raise RegimeError("negative rate at a substep midpoint; use the "
                          "number-basis integrator")
    k_arr = np.arange(len(psi0), dtype=float)
    # (n_steps, dim) exact no-jump decay factors, shared by all blocks
    decay = np.exp(-0.5 * (np.outer(sizes * km_mid, k_arr)
                           + np.outer(sizes * kp_mid, k_arr + 1.0)))

    seeds = np.random.SeedSequence(master_seed).spawn(n_traj)
    blocks = [(b, min(_BLOCK, n_traj - b * _BLOCK))
              for b in range((n_traj + _BLOCK - 1) // _BLOCK)]

    def work(args):
        b, nb = args
        return _run_block(psi0, nb, seeds[b * _BLOCK: b * _BLOCK + nb],
                          decay, km_mid, kp_mid, mids, sizes, sample_idx,
                          False)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    s1 = np.zeros(len(sample_idx))
    s2 = np.zeros(len(sample_idx))
    jumps = np.zeros(2)
    for r1, r2, jm, _, _ in results:   # fixed block order
        s1 += r1
        s2 += r2
        jumps += jm
    mean = s1 / n_traj
    var = np.maximum(s2 - s1**2 / n_traj, 0.0) / (n_traj - 1)
    return EnsembleEstimate(t_grid=tg, n_mean=mean,
                            std_err=np.sqrt(var / n_traj),
                            n_traj=n_traj, master_seed=master_seed,
                            jumps_down_mean=jumps[0] / n_traj,
                            jumps_up_mean=jumps[1] / n_traj)


def run_trajectory(psi0: np.ndarray, table: CoefficientTable,
                   t_grid: Sequence[float], seed: int,
                   step_safety: float = 2.0) -> Trajectory:
    """Single trajectory with its jump log (debug path, same stepping)."""
    est_inputs = np.asarray(psi0, dtype=complex)
    tg = np.asarray(t_grid, dtype=float)
    n0 = float(np.arange(len(est_inputs)) @ np.abs(est_inputs) ** 2)
    mids, sizes, sample_idx = _substep_plan(table, tg, n0, step_safety)
    vals = table.values_at(mids)
    km_mid = vals["delta"] + vals["gamma"]
    kp_mid = vals["delta"] - vals["gamma"]
    if np.any(km_mid < 0.0) or np.any(kp_mid < 0.0):
        raise RegimeError("negative rate at a substep midpoint; use the "
                          "number-basis integrator")
    k_arr = np.arange(len(est_inputs), dtype=float)
    decay = np.exp(-0.5 * (np.outer(sizes * km_mid, k_arr)
                           + np.outer(sizes * kp_mid, k_arr + 1.0)))
    seq = np.random.SeedSequence(seed)
    _, _, _, events, psi = _run_block(est_inputs, 1, [seq], decay, km_mid,
                                      kp_mid, mids, sizes, sample_idx, True)
    return Trajectory(seed=seed, jump_log=events[0], final_state=psi[0])
