"""Classical multi-machine time-domain simulation with probing injections.

Model
-----
Each machine is a constant EMF behind its transient reactance; loads are
constant impedances folded into the bus admittance matrix; the network is
algebraic (solved at every integrator stage).  Machine i obeys the swing
equation

    m_i * dw_i/dt = p_ref,i + g_i - p_e,i - d_i * w_i
    ddelta_i/dt   = omega_syn * w_i

with m_i = 2 h_i s_rated,i / s_base, all powers per-unit on the system
base, w in pu speed deviation, delta in electrical radians.  A first-order
governor g_i (droop gain, time constant) provides slow frequency
restoration.  The probing signal is a small constant-power injection at
one bus.

Every run starts at the flat-start equilibrium (delta = 0, w = 0) with
p_ref chosen so the initial derivatives vanish identically; with a zero
probe the trace therefore stays at equilibrium to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _sim_kernels as kern
from .errors import SimulationDiverged, SimulationError
from .features import FeatureId
from .grid import admittance_matrix
from .seeding import STREAM_PROBING, derive_rng

#: speed deviation (pu) beyond which the small-signal model is declared void
DIVERGENCE_LIMIT = 0.1

#: the constant-power probe must stay small for the linearised reading
PROBE_AMPLITUDE_LIMIT = 0.05

#: moving-average width (samples) used when differentiating angle series
ROCOF_WINDOW = 5

_PROBE_KINDS = ("step", "pulse", "prbs")


@dataclass(frozen=True)
class ProbingSignal:
    """Active-power probing injection at one bus.

    amplitude is per-unit on the system base; zero disables the probe.
    `width` applies to pulses, `period` to the PRBS chip length.
    """

    bus: int
    kind: str = "step"
    amplitude: float = 0.005
    start: float = 0.0
    width: float = 0.1
    period: float = 0.02

    def __post_init__(self):
        if self.kind not in _PROBE_KINDS:
            raise SimulationError(
                f"probe kind must be one of {_PROBE_KINDS}, got {self.kind!r}"
            )
        if not (0.0 <= self.amplitude <= PROBE_AMPLITUDE_LIMIT):
            raise SimulationError(
                f"probe amplitude must lie in [0, {PROBE_AMPLITUDE_LIMIT}] pu, "
                f"got {self.amplitude}"
            )
        if self.start < 0:
            raise SimulationError(f"probe start must be >= 0, got {self.start}")
        if self.width < 0:
            raise SimulationError(f"probe width must be >= 0, got {self.width}")
        if self.period <= 0:
            raise SimulationError(f"probe period must be > 0, got {self.period}")


@dataclass(frozen=True)
class SimConfig:
    """Integrator and governor settings."""

    dt: float = 0.001
    duration: float = 2.0
    droop_gain: float = 20.0
    governor_tc: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.005):
            raise SimulationError(f"dt must lie in (0, 0.005] s, got {self.dt}")
        if self.duration < 2.0:
            raise SimulationError(
                f"duration must be >= 2 s, got {self.duration}"
            )
        if self.droop_gain < 0:
            raise SimulationError(
                f"droop_gain must be >= 0, got {self.droop_gain}"
            )
        if self.governor_tc <= 0:
            raise SimulationError(
                f"governor_tc must be > 0, got {self.governor_tc}"
            )


@dataclass(frozen=True)
class SimulationTrace:
    """Recorded run: per-bus channels plus raw machine state.

    Channel arrays are (n_buses, n_steps), bus rows ordered by id.
    delta_omega is pu speed deviation, rocof its smoothed derivative in
    pu/s, v_mag the voltage-magnitude deviation from the pre-probe
    operating point.  machine_* arrays are (n_machines, n_steps).
    """

    times: np.ndarray
    bus_ids: tuple
    delta_omega: np.ndarray
    rocof: np.ndarray
    v_mag: np.ndarray
    machine_delta: np.ndarray
    machine_omega: np.ndarray
    machine_inertia: np.ndarray
    h_sys: float
    probe_bus: int
    probe_amplitude: float
    dt: float

    @property
    def rate(self):
        return 1.0 / self.dt

    def channel(self, bus_id, feature):
        row = self.bus_ids.index(bus_id)
        if feature is FeatureId.DELTA_OMEGA:
            return self.delta_omega[row]
        if feature is FeatureId.ROCOF:
            return self.rocof[row]
        if feature is FeatureId.VOLT_MAG:
            return self.v_mag[row]
        raise SimulationError(f"unknown feature {feature!r}")

    def coi_omega(self):
        """Inertia-weighted centre-of-inertia speed deviation series."""
        wsum = self.machine_inertia.sum()
        return (self.machine_inertia[:, None] * self.machine_omega).sum(0) / wsum


def rocof(series, rate, window=ROCOF_WINDOW):
    """Smoothed numerical derivative of a uniformly sampled series.

    Central differences inside, one-sided differences at the ends, then a
    centred moving average of odd width `window` (shrinking one-sided at
    the edges).  window=1 disables smoothing.  Output length equals input
    length.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"series must be 1-D, got shape {x.shape}")
    if x.size < 2:
        raise ValueError("series needs at least two samples")
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if window > x.size:
        raise ValueError(f"window {window} exceeds series length {x.size}")

    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) * (rate / 2.0)
    d[0] = (x[1] - x[0]) * rate
    d[-1] = (x[-1] - x[-2]) * rate
    if window == 1:
        return d

    half = window // 2
    out = np.empty_like(d)
    out[half:d.size - half] = np.convolve(d, np.full(window, 1.0 / window),
                                          mode="valid")
    for k in range(half):
        out[k] = d[:k + half + 1].mean()
        out[d.size - 1 - k] = d[d.size - 1 - k - half:].mean()
    return out


def generate_probing(probe, cfg):
    """Probe power series on the integrator grid (one value per step)."""
    t = np.arange(round(cfg.duration / cfg.dt) + 1) * cfg.dt
    p = np.zeros(t.size)
    if probe.amplitude == 0.0:
        return p
    eps = 1e-12
    if probe.kind == "step":
        p[t >= probe.start - eps] = probe.amplitude
    elif probe.kind == "pulse":
        mask = (t >= probe.start - eps) & (t < probe.start + probe.width - eps)
        p[mask] = probe.amplitude
    else:  # prbs
        rng = derive_rng(cfg.seed, STREAM_PROBING)
        active = t >= probe.start - eps
        # nudge the quotient so grid times that fall exactly on a chip
        # boundary are never floored into the previous chip
        quotient = (t[active] - probe.start) / probe.period + 1e-9
        chips = np.floor(quotient).astype(np.int64)
        chips = np.maximum(chips, 0)
        signs = rng.integers(0, 2, size=int(chips.max()) + 1) * 2 - 1
        p[active] = probe.amplitude * signs[chips]
    return p


def _machine_arrays(system, cfg):
    gens = system.generators
    s_base = system.s_base
    mbuses = system.generator_buses()
    slot = {b: k for k, b in enumerate(mbuses)}
    mslot = np.array([slot[g.bus] for g in gens], dtype=np.int64)
    e_mag = np.ones(len(gens))
    xd_sys = np.array([g.xd_t * s_base / g.s_rated for g in gens])
    ym = 1.0 / (1j * xd_sys)
    m = np.array([2.0 * g.h * g.s_rated / s_base for g in gens])
    d = np.array([g.d * g.s_rated / s_base for g in gens])
    kdr = np.array([cfg.droop_gain * g.s_rated / s_base for g in gens])
    return mbuses, mslot, e_mag, ym, m, d, kdr


def simulate(system, probe, cfg):
    """Integrate the system under a probing injection; return the trace.

    Raises SimulationError for unusable inputs (unknown probe bus,
    singular network) and SimulationDiverged when the state leaves the
    small-signal region.
    """
    if not 1 <= probe.bus <= system.n_buses:
        raise SimulationError(f"probe bus {probe.bus} not in system")

    mbuses, mslot, e_mag, ym, m, d, kdr = _machine_arrays(system, cfg)
    n = system.n_buses
    y_aug = admittance_matrix(system)
    for bus in system.buses:
        i = bus.id - 1
        y_aug[i, i] += complex(bus.load_p, -bus.load_q)
    for g_idx, gen in enumerate(system.generators):
        i = gen.bus - 1
        y_aug[i, i] += ym[g_idx]

    try:
        z = np.linalg.inv(y_aug)
    except np.linalg.LinAlgError as exc:
        raise SimulationError(f"singular network matrix: {exc}") from exc
    if not np.all(np.isfinite(z)):
        raise SimulationError("network matrix inversion produced non-finite values")

    mb_idx = np.array([b - 1 for b in mbuses], dtype=np.int64)
    p_idx = probe.bus - 1
    zmm = np.ascontiguousarray(z[np.ix_(mb_idx, mb_idx)])
    zrow_p = np.ascontiguousarray(z[p_idx, mb_idx])
    zcol_p = np.ascontiguousarray(z[mb_idx, p_idx])
    zpp = complex(z[p_idx, p_idx])
    zsave = np.ascontiguousarray(z[:, mb_idx])
    zsave_p = np.ascontiguousarray(z[:, p_idx])

    omega_syn = 2.0 * math.pi * system.f_nominal
    n_mach = len(system.generators)
    delta0 = np.zeros(n_mach)
    w0 = np.zeros(n_mach)
    g0 = np.zeros(n_mach)

    # reference power = electrical power at the flat start, so the
    # pre-probe state is an exact equilibrium of the discretised system
    pref, _, _ = kern.solve_network(delta0, 0.0, e_mag, ym, mslot,
                                    zmm, zrow_p, zcol_p, zpp, zsave, zsave_p)
    pref = pref.copy()

    series = generate_probing(probe, cfg)
    status, bad_step, bad_mach, delta_hist, w_hist, v_hist = kern.run_swing(
        delta0, w0, g0, series, cfg.dt, omega_syn, cfg.governor_tc,
        e_mag, ym, mslot, m, d, kdr, pref,
        zmm, zrow_p, zcol_p, zpp, zsave, zsave_p, DIVERGENCE_LIMIT)

    if status != 0:
        t_bad = bad_step * cfg.dt
        reason = ("non-finite state" if status == 2
                  else f"|speed deviation| exceeded {DIVERGENCE_LIMIT} pu")
        raise SimulationDiverged(
            f"simulation diverged at t={t_bad:.3f} s (machine {bad_mach}): "
            f"{reason}", t=t_bad, machine=bad_mach)

    return _build_trace(system, probe, cfg, mslot, m,
                        delta_hist, w_hist, v_hist, omega_syn)


def _build_trace(system, probe, cfg, mslot, m_arr,
                 delta_hist, w_hist, v_hist, omega_syn):
    from .grid import system_inertia

    n = system.n_buses
    n_steps = delta_hist.shape[0]
    times = np.arange(n_steps) * cfg.dt
    rate = 1.0 / cfg.dt
    mbuses = system.generator_buses()

    delta_omega = np.zeros((n, n_steps))
    for slot_id, bus_id in enumerate(mbuses):
        sel = mslot == slot_id
        weights = m_arr[sel]
        delta_omega[bus_id - 1] = (weights[:, None] * w_hist[:, sel].T).sum(0) \
            / weights.sum()
    mach_bus_set = set(mbuses)
    for bus_id in range(1, n + 1):
        if bus_id in mach_bus_set:
            continue
        phase = np.unwrap(np.angle(v_hist[:, bus_id - 1]))
        delta_omega[bus_id - 1] = rocof(phase, rate, ROCOF_WINDOW) / omega_syn

    rocof_rows = np.zeros((n, n_steps))
    for i in range(n):
        rocof_rows[i] = rocof(delta_omega[i], rate, ROCOF_WINDOW)

    vm = np.abs(v_hist).T          # (n_buses, n_steps)
    v_dev = vm - vm[:, :1]

    return SimulationTrace(
        times=times,
        bus_ids=tuple(range(1, n + 1)),
        delta_omega=delta_omega,
        rocof=rocof_rows,
        v_mag=v_dev,
        machine_delta=delta_hist.T.copy(),
        machine_omega=w_hist.T.copy(),
        machine_inertia=m_arr.copy(),
        h_sys=system_inertia(system).h_sys,
        probe_bus=probe.bus,
        probe_amplitude=probe.amplitude,
        dt=cfg.dt,
    )


@dataclass(frozen=True)
class PmuRecord:
    """Multi-channel PMU capture at a uniform reporting rate.

    data maps (bus_id, FeatureId) -> 1-D float64 series; all channels
    share the same length and rate.  meta carries bookkeeping from the
    conditioning steps (repair counts, zero-power flags, ...).
    """

    rate: float
    buses: tuple
    features: tuple
    data: dict
    meta: dict

    @property
    def n_samples(self):
        return next(iter(self.data.values())).size

    @property
    def duration(self):
        return (self.n_samples - 1) / self.rate


PMU_RATE_MIN = 10.0
PMU_RATE_MAX = 240.0


def sample_pmu(trace, buses, rate):
    """Decimate trace channels onto a PMU reporting grid.

    `rate` must lie in [10, 240] Hz and divide the simulation rate; the
    simulation rate itself is allowed when it falls inside that range
    (identity decimation).
    """
    buses = sorted(set(int(b) for b in buses))
    if not buses:
        raise SimulationError("PMU bus set is empty")
    for b in buses:
        if b not in trace.bus_ids:
            raise SimulationError(f"PMU bus {b} not present in trace")
    if not PMU_RATE_MIN <= rate <= PMU_RATE_MAX:
        raise SimulationError(
            f"PMU rate must lie in [{PMU_RATE_MIN:g}, {PMU_RATE_MAX:g}] Hz, "
            f"got {rate}")
    sim_rate = trace.rate
    factor = sim_rate / rate
    if abs(factor - round(factor)) > 1e-9:
        raise SimulationError(
            f"PMU rate {rate} Hz must divide the simulation rate "
            f"{sim_rate:g} Hz")
    factor = int(round(factor))

    data = {}
    for b in buses:
        for feat in FeatureId:
            data[(b, feat)] = np.asarray(trace.channel(b, feat))[::factor].copy()
    return PmuRecord(rate=float(rate), buses=tuple(buses),
                     features=tuple(FeatureId), data=data,
                     meta={"sim_rate": sim_rate, "decimation": factor})
