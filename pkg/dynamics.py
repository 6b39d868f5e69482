"""
Lindblad master-equation integration for the qutrit-resonator system.

H(t) = w_r a^dag a + w_ge b^dag b + (alpha/2) b^dag b^dag b b + lambda (b^dag a + b a^dag)
     + (Omega(t)/sqrt2) (b e^{i w_ef t} + h.c.)
     + (g(t)/sqrt2) (b^dag b^dag a e^{-i w_f0g1 t} + h.c.)

The f0g1 phase is written so that the drive is resonant with |f,0> <-> |g,1>;
with the opposite sign both drives would be counter-rotating.

Frames:
    literal   Schroedinger picture, explicit carrier phases.
    rotating  per-level frame nu(q, m) = nu_q + m nu_r chosen so both drives
              are static on resonance; the coupling keeps an e^{+-i delta t} phase.

All Hamiltonians are in rad/s (hbar = 1).
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.linalg import null_space

import qcr
from hilbert import (
    LEVELS,
    DensityMatrix,
    SpaceDims,
    annihilation_resonator,
    lowering_qubit,
    populations_from_array,
    transition,
)
from numerics import hermitian_eigen, integrate_ode
from params import DeviceParams, derive
from pulses import PulseSchedule, apply_gates, envelope
from utils import write_csv
from validation import ModelConsistencyError, NumericalIntegrityError, check_density_matrix

logger = logging.getLogger(__name__)

FRAMES = ("literal", "rotating")
DRIVE_REFERENCES = ("dressed", "bare")

STEPS_PER_PERIOD = 50
# frequencies closer than this (rad/s) share one Hamiltonian component
FREQUENCY_RESOLUTION = 1.0

TRACE_COLUMNS = ["t_ns", "P_g", "P_e", "P_f", "n_mean", "trace_err", "min_eig"]


# ---- Hamiltonian ----

@dataclass(frozen=True)
class DressedTransitions:
    """Transition frequencies (rad/s) of the diagonalized static Hamiltonian."""
    omega_ge: float
    omega_ef: float
    omega_f0g1: float
    omega_r: float
    energies: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True, eq=False)
class CompiledHamiltonian:
    """H(t) = static + sum_k env[channel_k](t) * exp(i freq_k t) * matrices[k]."""
    static: np.ndarray
    matrices: np.ndarray  # (K, d, d)
    freqs: np.ndarray     # (K,)
    channels: np.ndarray  # (K,), 0 = always on, 1 = ef drive, 2 = f0g1 drive

    def at(self, t: float, env: np.ndarray) -> np.ndarray:
        if not self.freqs.size:
            return self.static
        coef = env[self.channels] * np.exp(1j * self.freqs * t)
        return self.static + np.tensordot(coef, self.matrices, axes=1)

    def restricted(self, channels: Sequence[int]) -> "CompiledHamiltonian":
        """Keep only the components of the listed channels."""
        keep = np.isin(self.channels, list(channels))
        return CompiledHamiltonian(
            static=self.static,
            matrices=self.matrices[keep],
            freqs=self.freqs[keep],
            channels=self.channels[keep],
        )

    @property
    def f_max(self) -> float:
        """Fastest phase in Hz: component frequencies and the static diagonal spread."""
        diag = np.real(np.diag(self.static))
        fastest = float(np.max(np.abs(self.freqs))) if self.freqs.size else 0.0
        fastest = max(fastest, float(diag.max() - diag.min()))
        return fastest / (2.0 * math.pi)


@dataclass(frozen=True)
class HamiltonianModel:
    dims: SpaceDims
    omega_r: float
    omega_ge: float
    alpha: float
    lambda_c: float
    frame: str = "rotating"
    include_coupling: bool = True
    drive_reference: str = "dressed"

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"Unknown frame {self.frame!r}; expected one of {FRAMES}")
        if self.drive_reference not in DRIVE_REFERENCES:
            raise ValueError(f"Unknown drive reference {self.drive_reference!r}")

    # operators

    @functools.cached_property
    def _ops(self):
        a = annihilation_resonator(self.dims).entries
        b = lowering_qubit(self.dims).entries
        return a, b

    def static_hamiltonian(self) -> np.ndarray:
        """Time-independent part in the literal frame."""
        a, b = self._ops
        ad, bd = a.conj().T, b.conj().T
        h = self.omega_r * ad @ a + self.omega_ge * bd @ b + 0.5 * self.alpha * bd @ bd @ b @ b
        if self.include_coupling:
            h = h + self.lambda_c * (bd @ a + b @ ad)
        return h

    @functools.cached_property
    def dressed(self) -> DressedTransitions:
        return dressed_transitions(self)

    def carriers(self) -> tuple[float, float]:
        """Reference (omega_ef, omega_f0g1) the drives are resonant with at zero detuning."""
        if self.drive_reference == "dressed":
            d = self.dressed
            return d.omega_ef, d.omega_f0g1
        omega_ef = self.omega_ge + self.alpha
        return omega_ef, self.omega_ge + omega_ef - self.omega_r

    def frame_frequencies(self) -> np.ndarray:
        """nu for every basis index; zero in the literal frame."""
        if self.frame == "literal":
            return np.zeros(self.dims.dim)
        omega_ef, omega_f0g1 = self.carriers()
        nu_q = np.array([0.0, self.omega_ge, self.omega_ge + omega_ef])
        nu_r = nu_q[2] - omega_f0g1
        m = np.arange(self.dims.n_fock)
        return (nu_q[:, None] + nu_r * m[None, :]).ravel()

    def compile(self, ef_detuning: float = 0.0, f0g1_detuning: float = 0.0) -> CompiledHamiltonian:
        """Group every matrix element by its phase frequency in the chosen frame."""
        a, b = self._ops
        ad, bd = a.conj().T, b.conj().T
        omega_ef, omega_f0g1 = self.carriers()
        w_ef = omega_ef + ef_detuning
        w_f0g1 = omega_f0g1 + f0g1_detuning
        nu = self.frame_frequencies()
        root2 = math.sqrt(2.0)

        terms = [
            (0, 0.0, self.static_hamiltonian() - np.diag(nu)),
            (1, w_ef, b / root2),
            (1, -w_ef, bd / root2),
            (2, -w_f0g1, bd @ bd @ a / root2),
            (2, w_f0g1, ad @ b @ b / root2),
        ]
        d = self.dims.dim
        groups = {}
        for channel, base, matrix in terms:
            rows, cols = np.nonzero(matrix)
            freqs = base + nu[rows] - nu[cols]
            for r, c, f in zip(rows, cols, freqs):
                key = (channel, int(round(f / FREQUENCY_RESOLUTION)))
                if key not in groups:
                    groups[key] = [f, np.zeros((d, d), dtype=complex)]
                groups[key][1][r, c] += matrix[r, c]

        static = np.zeros((d, d), dtype=complex)
        mats, freqs, channels = [], [], []
        for (channel, key), (f, m) in sorted(groups.items()):
            if channel == 0 and key == 0:
                static += m
            else:
                mats.append(m)
                freqs.append(f)
                channels.append(channel)
        return CompiledHamiltonian(
            static=static,
            matrices=np.array(mats).reshape(len(mats), d, d),
            freqs=np.array(freqs, dtype=float),
            channels=np.array(channels, dtype=int),
        )


def dressed_transitions(model: HamiltonianModel) -> DressedTransitions:
    """
    Diagonalize the static Hamiltonian and label eigenstates by maximal bare overlap.

    Raises:
        ModelConsistencyError: two bare states map onto one eigenstate
    """
    values, vectors = hermitian_eigen(model.static_hamiltonian())
    dims = model.dims
    energies = {}
    taken = set()
    for q, m in (("g", 0), ("e", 0), ("f", 0), ("g", 1)):
        overlap = np.abs(vectors[dims.index(q, m), :]) ** 2
        k = int(np.argmax(overlap))
        if k in taken:
            raise ModelConsistencyError(f"Bare state |{q},{m}> has no distinct dressed partner")
        taken.add(k)
        energies[f"{q}{m}"] = float(values[k])
    return DressedTransitions(
        omega_ge=energies["e0"] - energies["g0"],
        omega_ef=energies["f0"] - energies["e0"],
        omega_f0g1=energies["f0"] - energies["g1"],
        omega_r=energies["g1"] - energies["g0"],
        energies=energies,
    )


def build_model(
    p: DeviceParams,
    frame: str = "rotating",
    include_coupling: bool = True,
    drive_reference: str = "dressed",
    n_fock: int | None = None,
) -> HamiltonianModel:
    return HamiltonianModel(
        dims=SpaceDims(n_fock or p.n_fock),
        omega_r=p.omega_r_eff,
        omega_ge=p.omega_ge_eff,
        alpha=p.alpha,
        lambda_c=p.lambda_c,
        frame=frame,
        include_coupling=include_coupling,
        drive_reference=drive_reference,
    )


# ---- Dissipators ----

@dataclass(frozen=True, eq=False)
class DissipatorSet:
    """
    Jump operators with static rates, plus the QCR pair Gamma_down(u) D[a],
    Gamma_up(u) D[a^dag] that follows the bias envelope fraction u.
    """
    dims: SpaceDims
    names: tuple
    operators: np.ndarray     # (K, d, d)
    static_rates: np.ndarray  # (K,)
    qcr_table: qcr.RateTable | None = None
    qcr_slots: tuple = ()     # indices of the QCR down/up operators

    def __post_init__(self):
        if np.any(self.static_rates < 0):
            bad = [n for n, r in zip(self.names, self.static_rates) if r < 0]
            raise ValueError(f"Negative dissipation rates: {bad}")

    def rates(self, u: float = 0.0) -> np.ndarray:
        r = self.static_rates.copy()
        if self.qcr_table is not None:
            down, up = self.qcr_table.rates(u)
            r[self.qcr_slots[0]] += down
            r[self.qcr_slots[1]] += up
        return r

    def with_rates_only(self) -> "DissipatorSet":
        """Drop operators whose rate is zero at every u."""
        keep = [k for k, r in enumerate(self.static_rates)
                if r > 0 or (self.qcr_table is not None and k in self.qcr_slots)]
        slots = tuple(keep.index(k) for k in self.qcr_slots) if self.qcr_table is not None else ()
        return DissipatorSet(
            dims=self.dims,
            names=tuple(self.names[k] for k in keep),
            operators=self.operators[keep],
            static_rates=self.static_rates[keep],
            qcr_table=self.qcr_table,
            qcr_slots=slots,
        )


def build_dissipators(
    p: DeviceParams,
    V_b: float = 0.0,
    dims: SpaceDims | None = None,
    qcr_table: qcr.RateTable | None = None,
) -> DissipatorSet:
    """
    Dissipators for the device. The QCR pair is present only for V_b > 0;
    at zero bias the refrigerator's residual contribution is part of kappa_r.
    """
    dims = dims or SpaceDims(p.n_fock)
    d = derive(p)
    a = annihilation_resonator(dims).entries
    ad = a.conj().T
    sqrt_half = math.sqrt(0.5)
    proj = {lvl: transition(dims, lvl, lvl).entries for lvl in LEVELS}

    channels = [
        ("resonator_decay", a, p.kappa_r * (1.0 + p.N_tr)),
        ("resonator_excitation", ad, p.kappa_r * p.N_tr),
        ("qcr_down", a, 0.0),
        ("qcr_up", ad, 0.0),
        ("ge_decay", transition(dims, "g", "e").entries,
         p.gamma_T_ge * (1.0 + p.N_Tq) + d.gamma_ge * (1.0 + d.n_th)),
        ("ge_excitation", transition(dims, "e", "g").entries,
         p.gamma_T_ge * p.N_Tq + d.gamma_ge * d.n_th),
        ("ef_decay", transition(dims, "e", "f").entries,
         p.gamma_T_ef * (1.0 + p.N_Tq) + d.gamma_ef * (1.0 + d.n_th_ef)),
        ("ef_excitation", transition(dims, "f", "e").entries,
         p.gamma_T_ef * p.N_Tq + d.gamma_ef * d.n_th_ef),
        ("ge_dephasing", sqrt_half * (proj["e"] - proj["g"]), d.gamma_phi_ge),
        ("ef_dephasing", sqrt_half * (proj["f"] - proj["e"]), d.gamma_phi_ef),
    ]
    if V_b > 0 and qcr_table is None:
        qcr_table = qcr.rate_table(V_b, p.omega_r_eff, qcr.junction_params(p))
    if V_b <= 0:
        qcr_table = None

    diss = DissipatorSet(
        dims=dims,
        names=tuple(c[0] for c in channels),
        operators=np.array([c[1] for c in channels], dtype=complex),
        static_rates=np.array([c[2] for c in channels], dtype=float),
        qcr_table=qcr_table,
        qcr_slots=(2, 3),
    )
    return diss.with_rates_only()


# ---- Evolution ----

@dataclass(frozen=True, eq=False)
class PopulationTrace:
    t: np.ndarray
    levels: np.ndarray  # (N, 3, n_fock)
    P_g: np.ndarray
    P_e: np.ndarray
    P_f: np.ndarray
    n_mean: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    final: np.ndarray   # density matrix at the last sample
    dims: SpaceDims

    @property
    def residual(self) -> np.ndarray:
        """Excitation left outside |g>: 1 - P_g."""
        return 1.0 - self.P_g

    def final_state(self) -> DensityMatrix:
        return DensityMatrix(self.dims, 0.5 * (self.final + self.final.conj().T))

    def rows(self):
        for i in range(self.t.size):
            yield (self.t[i] * 1e9, self.P_g[i], self.P_e[i], self.P_f[i],
                   self.n_mean[i], self.trace_err[i], self.min_eig[i])

    def write_csv(self, path: str) -> str:
        return write_csv(path, TRACE_COLUMNS, self.rows())


def _lindblad_rhs(hamiltonian: CompiledHamiltonian, diss: DissipatorSet, schedule: PulseSchedule):
    d = diss.dims.dim
    L = diss.operators
    L_dag = L.conj().transpose(0, 2, 1)
    L_sq = L_dag @ L
    V_b = schedule.qcr_bias.amplitude

    def rhs(t, y):
        rho = y.reshape(d, d)
        env = np.array([1.0, envelope(schedule.ef_drive, t), envelope(schedule.f0g1_drive, t)])
        u = envelope(schedule.qcr_bias, t) / V_b if V_b > 0 else 0.0
        r = diss.rates(u)
        h_eff = hamiltonian.at(t, env) - 0.5j * np.tensordot(r, L_sq, axes=1)
        rho_dot = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
        rho_dot += np.tensordot(r, L @ rho @ L_dag, axes=1)
        return rho_dot.ravel()

    return rhs


def _check_hermitian_h(hamiltonian: CompiledHamiltonian, schedule: PulseSchedule, times):
    for t in times:
        env = np.array([1.0, envelope(schedule.ef_drive, t), envelope(schedule.f0g1_drive, t)])
        h = hamiltonian.at(t, env)
        scale = max(1.0, float(np.max(np.abs(h))))
        defect = float(np.max(np.abs(h - h.conj().T)))
        if defect > 1e-12 * scale:
            raise NumericalIntegrityError(f"H(t) not Hermitian at t = {t:.4e} s: defect {defect:.3e}")


def _step_bound(hamiltonian: CompiledHamiltonian, schedule: PulseSchedule) -> float:
    f_max = hamiltonian.f_max
    bound = 1.0 / (STEPS_PER_PERIOD * f_max) if f_max > 0 else np.inf
    # keep the integrator from stepping over a pulse edge
    edges = [e for p in schedule.channels.values() if p.amplitude != 0.0
             for e in (p.t_rise, p.t_fall) if e > 0]
    if edges:
        bound = min(bound, min(edges) / 4.0)
    return bound


def evolve(
    rho0: DensityMatrix,
    model: HamiltonianModel,
    diss: DissipatorSet,
    schedule: PulseSchedule,
    t_grid: Sequence[float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    method: str = "RK45",
) -> PopulationTrace:
    """
    Integrate the master equation and sample populations on t_grid.

    Preparation gates of the schedule are applied to rho0 before t_grid[0].

    Raises:
        IntegrationError: the integrator could not reach the end of t_grid
        NumericalIntegrityError: a sampled state lost trace, Hermiticity or positivity
    """
    if not (rho0.dims == model.dims == diss.dims):
        raise ValueError(f"Dimension mismatch: rho {rho0.dims}, model {model.dims}, diss {diss.dims}")
    t_grid = np.asarray(t_grid, dtype=float)

    if schedule.prep_gates:
        rho0 = apply_gates(rho0, schedule.gate_names)

    # drives that are off contribute no phases to resolve
    active = [0] + [k for k, pulse in ((1, schedule.ef_drive), (2, schedule.f0g1_drive))
                    if pulse.amplitude != 0.0]
    hamiltonian = model.compile(
        ef_detuning=schedule.ef_drive.carrier_detuning,
        f0g1_detuning=schedule.f0g1_drive.carrier_detuning,
    ).restricted(active)
    _check_hermitian_h(hamiltonian, schedule, (t_grid[0], 0.5 * (t_grid[0] + t_grid[-1]), t_grid[-1]))
    max_step = _step_bound(hamiltonian, schedule)
    logger.debug("evolve: %s frame, dim %d, %d components, max_step %.3e s",
                 model.frame, model.dims.dim, hamiltonian.freqs.size, max_step)

    d = model.dims.dim
    nu = model.frame_frequencies()
    y0 = np.array(rho0.entries, dtype=complex)
    if t_grid[0] != 0.0:
        phase = np.exp(1j * nu * t_grid[0])
        y0 = phase[:, None] * y0 * phase.conj()[None, :]

    sol = integrate_ode(
        _lindblad_rhs(hamiltonian, diss, schedule),
        t_grid,
        y0.ravel(),
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        method=method,
    )

    pops, trace_err, min_eig = [], [], []
    for t, y in zip(sol.t, sol.y):
        rho = y.reshape(d, d)
        diag = check_density_matrix(rho, where=f"t = {t:.6e} s")
        trace_err.append(diag.trace_err)
        min_eig.append(diag.min_eig)
        pops.append(populations_from_array(rho, model.dims))
    # back to the lab frame so the state can be reused elsewhere
    phase = np.exp(-1j * nu * sol.t[-1])
    final = phase[:, None] * sol.y[-1].reshape(d, d) * phase.conj()[None, :]

    return PopulationTrace(
        t=sol.t,
        levels=np.array([p.levels for p in pops]),
        P_g=np.array([p.P_g for p in pops]),
        P_e=np.array([p.P_e for p in pops]),
        P_f=np.array([p.P_f for p in pops]),
        n_mean=np.array([p.n_mean for p in pops]),
        trace_err=np.array(trace_err),
        min_eig=np.array(min_eig),
        final=final,
        dims=model.dims,
    )


# ---- Steady state ----

def liouvillian(hamiltonian: np.ndarray, operators: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Column-stacked superoperator, vec(A X B) = (B^T kron A) vec(X)."""
    d = hamiltonian.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(eye, hamiltonian) - np.kron(hamiltonian.T, eye))
    for rate, L in zip(rates, operators):
        if rate == 0.0:
            continue
        LdL = L.conj().T @ L
        sup += rate * (np.kron(L.conj(), L) - 0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye))
    return sup


def steady_state(model: HamiltonianModel, diss: DissipatorSet, qcr_level: float = 1.0) -> DensityMatrix:
    """
    Null vector of the static Liouvillian (drives off, QCR at qcr_level * V_b).

    Raises:
        ModelConsistencyError: the null space is not one-dimensional
        NumericalIntegrityError: the residual |L rho| / |L| exceeds 1e-10
    """
    if model.dims != diss.dims:
        raise ValueError("Model and dissipators live on different spaces")
    d = model.dims.dim
    sup = liouvillian(model.static_hamiltonian(), diss.operators, diss.rates(qcr_level))
    kernel = null_space(sup, rcond=1e-12)
    if kernel.shape[1] != 1:
        raise ModelConsistencyError(
            f"Steady state is not unique: null space has dimension {kernel.shape[1]}"
        )
    rho = kernel[:, 0].reshape(d, d, order='F')
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)

    residual = float(np.linalg.norm(sup @ rho.ravel(order='F')) / np.linalg.norm(sup))
    if residual > 1e-10:
        raise NumericalIntegrityError(f"Steady-state residual {residual:.3e} exceeds 1e-10")
    logger.debug("steady state residual %.3e", residual)
    return DensityMatrix(model.dims, rho)


# ---- Frame cross-check ----

@dataclass(frozen=True, eq=False)
class Scenario:
    params: DeviceParams
    schedule: PulseSchedule
    rho0: DensityMatrix
    t_grid: np.ndarray
    include_coupling: bool = True


def frame_equivalence_check(scenario: Scenario, threshold: float = 1e-2) -> float:
    """
    Run the scenario in both frames and return max |Delta P| over qubit populations.

    Raises:
        ModelConsistencyError: deviation above threshold
    """
    p = scenario.params
    diss = build_dissipators(p, V_b=scenario.schedule.qcr_bias.amplitude, dims=scenario.rho0.dims)
    traces: List[PopulationTrace] = []
    for frame in FRAMES:
        model = build_model(p, frame=frame, include_coupling=scenario.include_coupling,
                            n_fock=scenario.rho0.dims.n_fock)
        traces.append(evolve(scenario.rho0, model, diss, scenario.schedule, scenario.t_grid))
    literal, rotating = traces
    deviation = float(max(
        np.max(np.abs(literal.P_g - rotating.P_g)),
        np.max(np.abs(literal.P_e - rotating.P_e)),
        np.max(np.abs(literal.P_f - rotating.P_f)),
    ))
    logger.info("frame equivalence: max population deviation %.3e", deviation)
    if deviation > threshold:
        raise ModelConsistencyError(
            f"Literal and rotating frames disagree by {deviation:.3e} (threshold {threshold:g})"
        )
    return deviation
