"""Second-order time-dependent Schrieffer-Wolff transformation and leakage bounds.

Conventions: the rotated state is e^{-S}|psi>, so the effective Hamiltonian is
e^{-S} H e^{S} + i (d e^{-S}/dt) e^{S}. All matrices are 9x9 in angular units
(rad/us) and time is in microseconds. Every function accepts stacks of
matrices with arbitrary leading axes; time-series helpers treat axis -3 as
time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gmon
from .qops import SubspaceLayout, commutator, spectral_norm

DEGENERACY_RTOL = 1e-6


class DegenerateGapError(ValueError):
    pass


def energy_denominators(H0: np.ndarray, layout: SubspaceLayout) -> np.ndarray:
    """D[i, j] = E_j - E_i for states in different subspaces, 1 elsewhere.

    The placeholder 1 on intra-subspace entries is never used: every caller
    multiplies by the block-off-diagonal mask.
    """
    E = np.real(np.diagonal(H0, axis1=-2, axis2=-1))
    labels = layout.labels()
    for idx in layout.subspaces:
        block = E[..., list(idx)]
        if np.max(np.abs(block - block[..., :1]), initial=0.0) > 1e-9 * layout.gap:
            raise ValueError("H0 must be constant on each subspace")
    D = E[..., None, :] - E[..., :, None]
    off = labels[:, None] != labels[None, :]
    if np.any(np.abs(D[..., off]) < DEGENERACY_RTOL * layout.gap):
        raise DegenerateGapError("degenerate energies between distinct subspaces")
    return np.where(off, D, 1.0)


def _off_mask(layout: SubspaceLayout) -> np.ndarray:
    return ~layout.same_block_mask()


def block_off(X: np.ndarray, layout: SubspaceLayout) -> np.ndarray:
    return np.where(_off_mask(layout), X, 0)


def block_diag(X: np.ndarray, layout: SubspaceLayout) -> np.ndarray:
    return np.where(_off_mask(layout), 0, X)


def s1_generator(H0, H2, layout: SubspaceLayout) -> np.ndarray:
    """S1^{a,a'} = H2^{a,a'} / (E_a' - E_a); solves [H0, S1] + H2 = 0."""
    D = energy_denominators(H0, layout)
    return block_off(H2 / D, layout)


def s2_generator(H0, H1, H2, dH2_dt, layout: SubspaceLayout) -> np.ndarray:
    """S2^{a,a'} = (H1^a H2^{a,a'} - H2^{a,a'} H1^{a'} - i dH2^{a,a'}/dt) / (E_a' - E_a)^2.

    Solves [H0, S2] + [H1, S1] - i dS1/dt = 0.
    """
    D = energy_denominators(H0, layout)
    return block_off((commutator(H1, H2) - 1j * dH2_dt) / (D * D), layout)


def s2_cross(H0, H2, layout: SubspaceLayout) -> np.ndarray:
    """Second-order generator piece for two-step paths between non-adjacent blocks.

    With three subspaces, (1/2)[H2, S1] has an Omega_0 <-> Omega_2 part (via
    Omega_1). This term removes it: [H0, S2x] + offdiag((1/2)[H2, S1]) = 0.
    It vanishes identically when only two subspaces are coupled.
    """
    D = energy_denominators(H0, layout)
    S1 = block_off(H2 / D, layout)
    return block_off(0.5 * commutator(H2, S1) / D, layout)


@dataclass(frozen=True)
class Generators:
    s1: np.ndarray
    s2: np.ndarray
    ds1: np.ndarray
    ds2: np.ndarray


def generators(H0, H1, H2, dH1, dH2, d2H2, layout: SubspaceLayout) -> Generators:
    """S1, S2 (including the cross-block piece) and their time derivatives."""
    D = energy_denominators(H0, layout)
    off = _off_mask(layout)
    s1 = np.where(off, H2 / D, 0)
    ds1 = np.where(off, dH2 / D, 0)
    d2s1 = np.where(off, d2H2 / D, 0)
    c = commutator(H2, s1)
    dc = commutator(dH2, s1) + commutator(H2, ds1)
    s2 = np.where(off, (commutator(H1, s1) + 0.5 * c - 1j * ds1) / D, 0)
    ds2 = np.where(off, (commutator(dH1, s1) + commutator(H1, ds1)
                         + 0.5 * dc - 1j * d2s1) / D, 0)
    return Generators(s1, s2, ds1, ds2)


def effective_hamiltonians(H0, H1, H2, dH1_dt, dH2_dt, d2H2_dt2, layout: SubspaceLayout,
                           gens: Generators | None = None):
    """Block-diagonal and block-off-diagonal effective Hamiltonians through third order.

    The third-order remainder is
        X3 = [H1, S2] + (1/2)[H2, S2] + (1/3)[[H2, S1], S1]
             - (1/4)[offdiag([H2, S1]), S1] - i dS2/dt
    and h_d = H0 + H1 + (1/2) diag([H2, S1]) + diag(X3), h_od = offdiag(X3).
    With two coupled subspaces this reduces to the familiar form
    h_od = [H1, S2] + (1/3)[[H2, S1], S1] - i dS2/dt.
    """
    if gens is None:
        gens = generators(H0, H1, H2, dH1_dt, dH2_dt, d2H2_dt2, layout)
    s1, s2 = gens.s1, gens.s2
    off = _off_mask(layout)
    c = commutator(H2, s1)
    x3 = (commutator(H1, s2) + 0.5 * commutator(H2, s2) + commutator(c, s1) / 3.0
          - 0.25 * commutator(np.where(off, c, 0), s1) - 1j * gens.ds2)
    h_d = H0 + H1 + np.where(off, 0, 0.5 * c + x3)
    h_od = np.where(off, x3, 0)
    return h_d, h_od


# -- finite differences along the time axis (-3) --------------------------------

def first_derivative(x: np.ndarray, dt: float) -> np.ndarray:
    """Central differences, one-sided at both ends; zero for a single frame."""
    x = np.asarray(x)
    d = np.zeros_like(x)
    n = x.shape[-3]
    if n < 2:
        return d
    d[..., 1:-1, :, :] = (x[..., 2:, :, :] - x[..., :-2, :, :]) / (2 * dt)
    d[..., 0, :, :] = (x[..., 1, :, :] - x[..., 0, :, :]) / dt
    d[..., -1, :, :] = (x[..., -1, :, :] - x[..., -2, :, :]) / dt
    return d


def second_derivative(x: np.ndarray, dt: float) -> np.ndarray:
    """Three-point second differences; the end frames reuse their neighbour's
    (one-sided) stencil. Zero for fewer than three frames."""
    x = np.asarray(x)
    d = np.zeros_like(x)
    n = x.shape[-3]
    if n < 3:
        return d
    d[..., 1:-1, :, :] = (x[..., 2:, :, :] - 2 * x[..., 1:-1, :, :] + x[..., :-2, :, :]) / dt ** 2
    d[..., 0, :, :] = d[..., 1, :, :]
    d[..., -1, :, :] = d[..., -2, :, :]
    return d


@dataclass(frozen=True)
class TswtFrame:
    s1: np.ndarray
    s2: np.ndarray
    h_eff_d: np.ndarray
    h_eff_od: np.ndarray
    timestamp: float
    gap: float


@dataclass(frozen=True)
class FrameStack:
    """Per-step transformation data for a whole trajectory, stored as arrays."""

    times_us: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    h_eff_d: np.ndarray
    h_eff_od: np.ndarray
    gaps: np.ndarray
    dt_us: float

    def __len__(self) -> int:
        return self.h_eff_od.shape[-3]

    def frames(self) -> list:
        return [TswtFrame(self.s1[k], self.s2[k], self.h_eff_d[k], self.h_eff_od[k],
                          float(self.times_us[k]), float(self.gaps[k]))
                for k in range(len(self))]


def dynamic_gaps(h_d: np.ndarray, layout: SubspaceLayout) -> np.ndarray:
    """Smallest separation between the Omega_0 block spectrum and the rest."""
    q = list(layout.omega0)
    rest = list(layout.omega1) + list(layout.omega2)
    e0 = np.linalg.eigvalsh(h_d[..., q, :][..., :, q])
    e1 = np.linalg.eigvalsh(h_d[..., rest, :][..., :, rest])
    return e1[..., 0] - e0[..., -1]


def frames_from_hamiltonians(H: np.ndarray, model: gmon.GmonModel, dt_us: float,
                             dynamic_gap: bool = False) -> FrameStack:
    """Build frames from a (..., N, 9, 9) stack of step Hamiltonians."""
    layout = model.layout
    H0, H1, H2 = gmon.decompose(H, model)
    dH1 = first_derivative(H1, dt_us)
    dH2 = first_derivative(H2, dt_us)
    d2H2 = second_derivative(H2, dt_us)
    gens = generators(H0, H1, H2, dH1, dH2, d2H2, layout)
    h_d, h_od = effective_hamiltonians(H0, H1, H2, dH1, dH2, d2H2, layout, gens)
    n = H.shape[-3]
    if dynamic_gap:
        gaps = dynamic_gaps(h_d, layout)
    else:
        gaps = np.full(H.shape[:-2], layout.gap)
    return FrameStack(np.arange(n) * dt_us, gens.s1, gens.s2, h_d, h_od,
                      gaps, dt_us)


def trajectory_frames(traj, model: gmon.GmonModel, eta_seq=None,
                      dynamic_gap: bool = False) -> FrameStack:
    H = gmon.hamiltonians(traj.knobs, model, eta_seq)
    return frames_from_hamiltonians(H, model, traj.dt_us, dynamic_gap)


@dataclass(frozen=True)
class LeakageLedger:
    boundary_start: float
    boundary_end: float
    derivative_terms: float
    integral_term: float
    l_tot: float

    @property
    def five_term(self) -> float:
        return self.l_tot + self.derivative_terms

    @property
    def boundary_terms(self) -> float:
        return self.boundary_start + self.boundary_end

    def to_dict(self) -> dict:
        return {"boundary_start": self.boundary_start, "boundary_end": self.boundary_end,
                "derivative_terms": self.derivative_terms,
                "integral_term": self.integral_term, "l_tot": self.l_tot}


def ledger_arrays(h_od: np.ndarray, gaps: np.ndarray, dt: float) -> dict:
    """Vectorised ledger over leading batch axes; time is axis -3 of ``h_od``."""
    n = h_od.shape[-3]
    if n < 3:
        raise ValueError("the leakage bound needs at least 3 frames")
    gaps = np.asarray(gaps, dtype=float)
    start = spectral_norm(h_od[..., 0, :, :]) / gaps[..., 0]
    end = spectral_norm(h_od[..., -1, :, :]) / gaps[..., -1]
    d_start = (h_od[..., 1, :, :] - h_od[..., 0, :, :]) / dt
    d_end = (h_od[..., -1, :, :] - h_od[..., -2, :, :]) / dt
    deriv = (2 * spectral_norm(d_start) / gaps[..., 0] ** 2
             + 2 * spectral_norm(d_end) / gaps[..., -1] ** 2)
    # interior second differences; the end frames reuse their neighbours
    d2 = (h_od[..., 2:, :, :] - 2 * h_od[..., 1:-1, :, :] + h_od[..., :-2, :, :]) / dt ** 2
    norms = spectral_norm(d2)
    integrand = np.concatenate([norms[..., :1], norms, norms[..., -1:]], axis=-1) / gaps ** 2
    integral = integrand.sum(axis=-1) * dt
    return {"boundary_start": start, "boundary_end": end, "derivative_terms": deriv,
            "integral_term": integral, "l_tot": start + end + integral}


def leakage_bound(trajectory_frames, dt: float) -> LeakageLedger:
    """Coherent leakage bound
        L_tot = |h_od(0)|/D + |h_od(T)|/D + int |d^2 h_od/dt^2| / D^2 dt
    with the spectral norm, plus the 2|dh_od/dt|/D^2 boundary terms of the
    longer five-term form (reported separately as ``derivative_terms``).
    ``dt`` is the frame spacing in us.
    """
    if isinstance(trajectory_frames, FrameStack):
        h_od, gaps = trajectory_frames.h_eff_od, trajectory_frames.gaps
    else:
        frames = list(trajectory_frames)
        if len(frames) < 3:
            raise ValueError("the leakage bound needs at least 3 frames")
        h_od = np.stack([f.h_eff_od for f in frames])
        gaps = np.array([f.gap for f in frames])
    vals = ledger_arrays(h_od, gaps, dt)
    return LeakageLedger(**{k: float(v) for k, v in vals.items()})


def trajectory_ledger(traj, model: gmon.GmonModel, eta_seq=None,
                      dynamic_gap: bool = False) -> LeakageLedger:
    return leakage_bound(trajectory_frames(traj, model, eta_seq, dynamic_gap), traj.dt_us)


class LeakageTracker:
    """Incremental leakage ledger for a trajectory that grows one step at a time.

    Frame k only depends on the step Hamiltonians k-1, k, k+1 (with one-sided
    stencils at the ends), so appending a step finalises frame n-2 and adds a
    provisional last frame. The ledger of the current prefix matches
    ``ledger_arrays`` on the same Hamiltonians up to summation order.
    """

    def __init__(self, model: gmon.GmonModel, dt_us: float):
        self.model = model
        self.dt_us = float(dt_us)
        self._H: list = []
        self._hod: list = []
        self._d2_norms: list = []   # |D2 h_od|_j for finalised interior j
        self._gap = model.layout.gap

    def __len__(self) -> int:
        return len(self._H)

    def append(self, H: np.ndarray) -> None:
        self._H.append(np.asarray(H, dtype=complex))
        n = len(self._H)
        if n <= 3:
            stack = frames_from_hamiltonians(np.stack(self._H), self.model, self.dt_us)
            self._hod = list(stack.h_eff_od)
        else:
            stack = frames_from_hamiltonians(np.stack(self._H[-3:]), self.model, self.dt_us)
            self._hod[-1] = stack.h_eff_od[1]
            self._hod.append(stack.h_eff_od[2])
        # D2 at interior frames 1..n-3 is final once frame n-2 is
        while len(self._d2_norms) < n - 3:
            j = len(self._d2_norms) + 1
            self._d2_norms.append(self._d2_norm(j))

    def _d2_norm(self, j: int) -> float:
        h = self._hod
        d2 = (h[j + 1] - 2 * h[j] + h[j - 1]) / self.dt_us ** 2
        return float(spectral_norm(d2))

    def integral_term(self) -> float:
        n = len(self._H)
        if n < 3:
            return 0.0
        last = self._d2_norm(n - 2)
        first = self._d2_norms[0] if self._d2_norms else last
        total = sum(self._d2_norms) + last + first + last
        return total / self._gap ** 2 * self.dt_us

    def boundary_terms(self) -> tuple:
        """(|h_od(0)|/D, |h_od(T)|/D) for the current prefix."""
        if not self._hod:
            return 0.0, 0.0
        return (float(spectral_norm(self._hod[0])) / self._gap,
                float(spectral_norm(self._hod[-1])) / self._gap)

    def l_tot(self) -> float:
        if len(self._H) < 3:
            return 0.0
        start, end = self.boundary_terms()
        return start + end + self.integral_term()

    def ledger(self) -> LeakageLedger:
        if len(self._H) < 3:
            raise ValueError("the leakage bound needs at least 3 frames")
        vals = ledger_arrays(np.stack(self._hod), np.full(len(self._hod), self._gap),
                             self.dt_us)
        return LeakageLedger(**{k: float(v) for k, v in vals.items()})


def _trapezoid(y: np.ndarray, dx: float) -> float:
    return float(dx * (y.sum() - 0.5 * (y[0] + y[-1])))


def adiabatic_bound(hd_frames, hod_frames, gap_frames, T: float) -> float:
    """Generalised adiabatic bound on a uniform grid s in [0, 1].

    ``hd_frames`` must hold the time-dependent block-diagonal part only (the
    static H0 is excluded). With B(s) = |dh_od/ds| + T|[h_d, h_od]| the bound is
        (1/T) [B(1)/D(1)^2 + B(0)/D(0)^2] + (1/T) int 5 B^2 / D^3 ds
        + int (T|[h_d,[h_d,h_od]]| + 2|[h_d, dh_od/ds]| + 2|[dh_d/ds, h_od]|
               + |d^2 h_od/ds^2| / T) / D^2 ds.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    hd = np.asarray(hd_frames)
    hod = np.asarray(hod_frames)
    gap = np.asarray(gap_frames, dtype=float) * np.ones(hod.shape[0])
    n = hod.shape[0]
    if n < 3:
        raise ValueError("need at least 3 frames on the s grid")
    ds = 1.0 / (n - 1)
    dhod = first_derivative(hod, ds)
    d2hod = second_derivative(hod, ds)
    dhd = first_derivative(hd, ds)
    c1 = commutator(hd, hod)
    B = spectral_norm(dhod) + T * spectral_norm(c1)
    boundary = (B[-1] / gap[-1] ** 2 + B[0] / gap[0] ** 2) / T
    squared = _trapezoid(5.0 * B ** 2 / gap ** 3, ds) / T
    nested = (T * spectral_norm(commutator(hd, c1)) + 2 * spectral_norm(commutator(hd, dhod))
              + 2 * spectral_norm(commutator(dhd, hod)) + spectral_norm(d2hod) / T)
    return float(boundary + squared + _trapezoid(nested / gap ** 2, ds))


def adiabatic_bound_for_stack(stack: FrameStack, model: gmon.GmonModel) -> float:
    """Adiabatic bound for frames spaced by ``stack.dt_us`` (so T = (N-1) dt)."""
    n = len(stack)
    hd = stack.h_eff_d - gmon.static_h(model)
    return adiabatic_bound(hd, stack.h_eff_od, stack.gaps, (n - 1) * stack.dt_us)
