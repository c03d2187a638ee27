"""Static grid model: buses, branches, synchronous machines.

Conventions
-----------
* Bus ids are 1-based externally (file formats, CLI, reports); internal
  array index is ``id - 1``.  A system's buses must be numbered 1..N.
* All impedances, loads and set-points are per-unit on the *system* MVA
  base ``s_base``.  Machine ratings ``s_rated`` are MVA; inertia
  constants ``h`` are seconds on the machine's own base.
* Instances are frozen; operations that "modify" a system return a new
  one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import CaseFormatError


@dataclass(frozen=True)
class Bus:
    """Network node with a constant-impedance load attached."""

    id: int
    base_kv: float
    load_p: float = 0.0
    load_q: float = 0.0
    has_generator: bool = False


@dataclass(frozen=True)
class Branch:
    """Undirected line/transformer in per-unit on the system base."""

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0


@dataclass(frozen=True)
class Generator:
    """Classical machine: EMF behind a transient reactance.

    s_rated : MVA rating of the machine.
    h       : inertia constant, seconds on the machine base.
    d       : damping coefficient, per-unit on the machine base.
    xd_t    : transient reactance, per-unit on the machine base.
    p_set   : dispatch set-point, per-unit on the *system* base.
    """

    bus: int
    s_rated: float
    h: float
    d: float = 1.0
    xd_t: float = 0.25
    p_set: float = 0.0


@dataclass(frozen=True)
class PowerSystem:
    """Validated, immutable grid case."""

    name: str
    buses: tuple
    branches: tuple
    generators: tuple
    s_base: float
    f_nominal: float = 60.0

    def __post_init__(self):
        if not self.buses:
            raise CaseFormatError("system has no buses")
        if self.s_base <= 0 or not math.isfinite(self.s_base):
            raise CaseFormatError(f"s_base must be positive, got {self.s_base}")
        if self.f_nominal <= 0:
            raise CaseFormatError(f"f_nominal must be positive, got {self.f_nominal}")
        n = len(self.buses)
        for k, bus in enumerate(self.buses):
            if bus.id != k + 1:
                raise CaseFormatError(
                    f"bus ids must be 1..{n} in order; position {k} holds id {bus.id}"
                )
            if bus.base_kv <= 0:
                raise CaseFormatError(f"bus {bus.id}: base_kv must be positive")
            if not (math.isfinite(bus.load_p) and math.isfinite(bus.load_q)):
                raise CaseFormatError(f"bus {bus.id}: non-finite load")
        for br in self.branches:
            if not (1 <= br.from_bus <= n and 1 <= br.to_bus <= n):
                raise CaseFormatError(f"branch {br.from_bus}-{br.to_bus}: unknown bus")
            if br.from_bus == br.to_bus:
                raise CaseFormatError(f"branch at bus {br.from_bus} is a self-loop")
            if br.x == 0.0:
                raise CaseFormatError(
                    f"branch {br.from_bus}-{br.to_bus}: zero series reactance"
                )
        if not self.generators:
            raise CaseFormatError("system has no generators")
        gen_buses = set()
        for g in self.generators:
            if not 1 <= g.bus <= n:
                raise CaseFormatError(f"generator references unknown bus {g.bus}")
            if g.s_rated <= 0 or g.h <= 0:
                raise CaseFormatError(
                    f"generator at bus {g.bus}: s_rated and h must be positive"
                )
            if g.d < 0:
                raise CaseFormatError(f"generator at bus {g.bus}: negative damping")
            if g.xd_t <= 0:
                raise CaseFormatError(
                    f"generator at bus {g.bus}: xd_t must be positive"
                )
            gen_buses.add(g.bus)
        flagged = {b.id for b in self.buses if b.has_generator}
        if flagged != gen_buses:
            raise CaseFormatError(
                f"has_generator flags {sorted(flagged)} disagree with "
                f"generator placement {sorted(gen_buses)}"
            )
        if not self.is_connected():
            raise CaseFormatError("branch graph is not connected")

    # -- topology ---------------------------------------------------------

    @property
    def n_buses(self):
        return len(self.buses)

    def bus_index(self, bus_id):
        """Internal 0-based index for an external 1-based id."""
        if not 1 <= bus_id <= self.n_buses:
            raise CaseFormatError(f"unknown bus id {bus_id}")
        return bus_id - 1

    def generator_buses(self):
        """Sorted external ids of buses that host at least one machine."""
        return sorted({g.bus for g in self.generators})

    def adjacency(self):
        """Binary symmetric bus adjacency matrix (no self-loops)."""
        n = self.n_buses
        a = np.zeros((n, n), dtype=np.int64)
        for br in self.branches:
            i, j = br.from_bus - 1, br.to_bus - 1
            a[i, j] = 1
            a[j, i] = 1
        return a

    def is_connected(self):
        n = self.n_buses
        neigh = [[] for _ in range(n)]
        for br in self.branches:
            neigh[br.from_bus - 1].append(br.to_bus - 1)
            neigh[br.to_bus - 1].append(br.from_bus - 1)
        seen = {0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in neigh[i]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == n


# -- inertia bookkeeping ----------------------------------------------------


def kinetic_energy(j_moment, omega_mech):
    """Stored kinetic energy 0.5*J*omega^2 in joules.

    j_moment in kg*m^2, omega_mech in mechanical rad/s.
    """
    if j_moment < 0:
        raise ValueError(f"negative moment of inertia {j_moment}")
    return 0.5 * j_moment * omega_mech**2


def inertia_constant(j_moment, omega_mech, s_rated_va):
    """Inertia constant H = J*omega^2 / (2*S) in seconds.

    s_rated_va is the machine rating in VA (not MVA), so the result is
    seconds of stored energy per unit of rated power.
    """
    if s_rated_va <= 0:
        raise ValueError(f"rating must be positive, got {s_rated_va}")
    return kinetic_energy(j_moment, omega_mech) / s_rated_va


@dataclass(frozen=True)
class InertiaAggregate:
    """System totals: stored energy at rated speed and the blended H."""

    energy_mws: float
    h_sys: float


def system_inertia(system, active=None):
    """Aggregate inertia of `system`, optionally over a machine subset.

    `active` is an iterable of generator positions (0-based indices into
    ``system.generators``); None means all machines.  The blended inertia
    constant is the energy-weighted average referred to the system base:
    h_sys = sum(h_i * s_rated_i) / s_base.
    """
    gens = system.generators
    if active is None:
        chosen = gens
    else:
        idx = sorted(set(int(i) for i in active))
        if not idx:
            raise ValueError("active machine set is empty")
        if idx[0] < 0 or idx[-1] >= len(gens):
            raise ValueError(f"machine index out of range: {idx}")
        chosen = [gens[i] for i in idx]
    energy = sum(g.h * g.s_rated for g in chosen)
    return InertiaAggregate(energy_mws=energy, h_sys=energy / system.s_base)


def scale_inertia(system, h_target):
    """Return a copy whose blended h_sys equals `h_target` exactly.

    Every machine's h is scaled by the same factor, so the machines keep
    their relative inertia shares.
    """
    if h_target <= 0 or not math.isfinite(h_target):
        raise ValueError(f"h_target must be positive and finite, got {h_target}")
    current = system_inertia(system).h_sys
    factor = h_target / current
    gens = tuple(replace(g, h=g.h * factor) for g in system.generators)
    return replace(system, generators=gens)


# -- network matrices --------------------------------------------------------


def admittance_matrix(system):
    """Complex bus admittance matrix Y (n x n) from the branch list.

    Each branch contributes series admittance 1/(r+jx) plus half its
    charging susceptance at both ends.
    """
    n = system.n_buses
    y = np.zeros((n, n), dtype=np.complex128)
    for br in system.branches:
        z = complex(br.r, br.x)
        if z == 0:
            raise CaseFormatError(
                f"branch {br.from_bus}-{br.to_bus}: zero impedance"
            )
        ys = 1.0 / z
        ysh = 0.5j * br.b_shunt
        i, j = br.from_bus - 1, br.to_bus - 1
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    return y


# -- plain-text case format ---------------------------------------------------

_SECTIONS = ("bus", "branch", "gen")


def save_case(system, path):
    """Write a system to the whitespace-delimited plain-text case format."""
    lines = [f"# case {system.name}", f"sbase {system.s_base!r}",
             f"fnominal {system.f_nominal!r}", "", "bus",
             "# id base_kv load_p load_q"]
    for b in system.buses:
        lines.append(f"{b.id} {b.base_kv!r} {b.load_p!r} {b.load_q!r}")
    lines += ["", "branch", "# from to r x b_shunt"]
    for br in system.branches:
        lines.append(f"{br.from_bus} {br.to_bus} {br.r!r} {br.x!r} {br.b_shunt!r}")
    lines += ["", "gen", "# bus s_rated h d xd_t p_set"]
    for g in system.generators:
        lines.append(
            f"{g.bus} {g.s_rated!r} {g.h!r} {g.d!r} {g.xd_t!r} {g.p_set!r}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_case(path):
    """Parse the plain-text case format written by :func:`save_case`.

    Raises CaseFormatError with a line number on any malformed input.
    """
    name = "case"
    s_base = None
    f_nominal = 60.0
    rows = {s: [] for s in _SECTIONS}
    section = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if raw.startswith("# case "):
                name = raw[len("# case "):].strip()
            if not line:
                continue
            parts = line.split()
            key = parts[0].lower()
            if key in _SECTIONS and len(parts) == 1:
                section = key
                continue
            if key == "sbase":
                s_base = _parse_float(parts[1:], 1, lineno, path)[0]
                continue
            if key == "fnominal":
                f_nominal = _parse_float(parts[1:], 1, lineno, path)[0]
                continue
            if section is None:
                raise CaseFormatError(
                    f"{path}:{lineno}: data before any section header"
                )
            rows[section].append((lineno, parts))
    if s_base is None:
        raise CaseFormatError(f"{path}: missing sbase line")
    buses = []
    for lineno, parts in rows["bus"]:
        vals = _parse_float(parts, 4, lineno, path)
        buses.append(Bus(id=int(vals[0]), base_kv=vals[1],
                         load_p=vals[2], load_q=vals[3]))
    branches = []
    for lineno, parts in rows["branch"]:
        vals = _parse_float(parts, 5, lineno, path)
        branches.append(Branch(from_bus=int(vals[0]), to_bus=int(vals[1]),
                               r=vals[2], x=vals[3], b_shunt=vals[4]))
    gens = []
    for lineno, parts in rows["gen"]:
        vals = _parse_float(parts, 6, lineno, path)
        gens.append(Generator(bus=int(vals[0]), s_rated=vals[1], h=vals[2],
                              d=vals[3], xd_t=vals[4], p_set=vals[5]))
    gen_buses = {g.bus for g in gens}
    buses = [replace(b, has_generator=b.id in gen_buses) for b in buses]
    try:
        return PowerSystem(name=name, buses=tuple(buses),
                           branches=tuple(branches), generators=tuple(gens),
                           s_base=s_base, f_nominal=f_nominal)
    except CaseFormatError as exc:
        raise CaseFormatError(f"{path}: {exc}") from exc


def _parse_float(parts, want, lineno, path):
    if len(parts) != want:
        raise CaseFormatError(
            f"{path}:{lineno}: expected {want} columns, got {len(parts)}"
        )
    out = []
    for p in parts:
        try:
            out.append(float(p))
        except ValueError:
            raise CaseFormatError(f"{path}:{lineno}: bad number {p!r}") from None
    return out
