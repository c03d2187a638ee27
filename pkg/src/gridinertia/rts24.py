"""Embedded IEEE 24-bus reliability test system.

Network data (38 branches, 2850 MW of load) is the published RTS-24 set
with impedances tabulated on a 100 MVA base and converted here to the
fleet MVA base.  The thermal/hydro fleet is carried at unit granularity,
with the largest blocks represented as pairs of identical half-rating
machines (two half-units at a plant behave identically to one full unit
in the classical model because h, d and xd_t are specified on the
machine base), giving 38 machines at 11 distinct buses plus the
synchronous condenser bus.

Inertia constants are seconds on the machine base, typical for the unit
class (hydro ~2.6-3.5 s, steam ~2.8-5 s, condenser 2 s).
"""

from .grid import Branch, Bus, Generator, PowerSystem

# bus id -> (load MW, load MVAr); buses absent here carry no load
_LOADS = {
    1: (108, 22), 2: (97, 20), 3: (180, 37), 4: (74, 15), 5: (71, 14),
    6: (136, 28), 7: (125, 25), 8: (171, 35), 9: (175, 36), 10: (195, 40),
    13: (265, 54), 14: (194, 39), 15: (317, 64), 16: (100, 20),
    18: (333, 68), 19: (181, 37), 20: (128, 26),
}

# (from, to, r, x, b) per-unit on 100 MVA
_BRANCHES_100 = (
    (1, 2, 0.0026, 0.0139, 0.4611),
    (1, 3, 0.0546, 0.2112, 0.0572),
    (1, 5, 0.0218, 0.0845, 0.0229),
    (2, 4, 0.0328, 0.1267, 0.0343),
    (2, 6, 0.0497, 0.1920, 0.0520),
    (3, 9, 0.0308, 0.1190, 0.0322),
    (3, 24, 0.0023, 0.0839, 0.0),
    (4, 9, 0.0268, 0.1037, 0.0281),
    (5, 10, 0.0228, 0.0883, 0.0239),
    (6, 10, 0.0139, 0.0605, 2.4590),
    (7, 8, 0.0159, 0.0614, 0.0166),
    (8, 9, 0.0427, 0.1651, 0.0447),
    (8, 10, 0.0427, 0.1651, 0.0447),
    (9, 11, 0.0023, 0.0839, 0.0),
    (9, 12, 0.0023, 0.0839, 0.0),
    (10, 11, 0.0023, 0.0839, 0.0),
    (10, 12, 0.0023, 0.0839, 0.0),
    (11, 13, 0.0061, 0.0476, 0.0999),
    (11, 14, 0.0054, 0.0418, 0.0879),
    (12, 13, 0.0061, 0.0476, 0.0999),
    (12, 23, 0.0124, 0.0966, 0.2030),
    (13, 23, 0.0111, 0.0865, 0.1818),
    (14, 16, 0.0050, 0.0389, 0.0818),
    (15, 16, 0.0022, 0.0173, 0.0364),
    (15, 21, 0.0063, 0.0490, 0.1030),
    (15, 21, 0.0063, 0.0490, 0.1030),
    (15, 24, 0.0067, 0.0519, 0.1091),
    (16, 17, 0.0033, 0.0259, 0.0545),
    (16, 19, 0.0030, 0.0231, 0.0485),
    (17, 18, 0.0018, 0.0144, 0.0303),
    (17, 22, 0.0135, 0.1053, 0.2212),
    (18, 21, 0.0033, 0.0259, 0.0545),
    (18, 21, 0.0033, 0.0259, 0.0545),
    (19, 20, 0.0051, 0.0396, 0.0833),
    (19, 20, 0.0051, 0.0396, 0.0833),
    (20, 23, 0.0028, 0.0216, 0.0455),
    (20, 23, 0.0028, 0.0216, 0.0455),
    (21, 22, 0.0087, 0.0678, 0.1424),
)

# (bus, s_rated MVA, h seconds, dispatchable) -- 38 machines, 11 buses.
# The bus-14 unit is the synchronous condenser: it spins (contributes
# inertia) but carries no active-power dispatch.
_UNITS = (
    (1, 20.0, 2.8, True), (1, 20.0, 2.8, True),
    (1, 76.0, 3.0, True), (1, 76.0, 3.0, True),
    (2, 20.0, 2.8, True), (2, 20.0, 2.8, True),
    (2, 76.0, 3.0, True), (2, 76.0, 3.0, True),
    (7, 100.0, 2.8, True), (7, 100.0, 2.8, True), (7, 100.0, 2.8, True),
    (13, 98.5, 2.6, True), (13, 98.5, 2.6, True),
    (13, 98.5, 2.6, True), (13, 98.5, 2.6, True),
    (13, 197.0, 2.6, True),
    (14, 50.0, 2.0, False),
    (15, 12.0, 2.6, True), (15, 12.0, 2.6, True), (15, 12.0, 2.6, True),
    (15, 12.0, 2.6, True), (15, 12.0, 2.6, True),
    (15, 155.0, 3.0, True),
    (16, 155.0, 3.0, True),
    (18, 200.0, 5.0, True), (18, 200.0, 5.0, True),
    (21, 200.0, 5.0, True), (21, 200.0, 5.0, True),
    (22, 50.0, 3.5, True), (22, 50.0, 3.5, True), (22, 50.0, 3.5, True),
    (22, 50.0, 3.5, True), (22, 50.0, 3.5, True), (22, 50.0, 3.5, True),
    (23, 155.0, 3.0, True), (23, 155.0, 3.0, True),
    (23, 175.0, 2.6, True), (23, 175.0, 2.6, True),
)


def build_ieee24(xd_t=0.25, d=1.0, f_nominal=60.0):
    """Construct the 24-bus test system on its fleet MVA base.

    xd_t and d apply uniformly to every machine (per-unit on the machine
    base); the loads are dispatched uniformly across the fleet so total
    generation matches the 2850 MW system load.
    """
    s_base = sum(u[1] for u in _UNITS)
    capacity = sum(u[1] for u in _UNITS if u[3])
    total_load = sum(mw for mw, _ in _LOADS.values())
    loading = total_load / capacity

    gen_buses = {u[0] for u in _UNITS}
    buses = []
    for bid in range(1, 25):
        mw, mvar = _LOADS.get(bid, (0, 0))
        buses.append(Bus(
            id=bid,
            base_kv=138.0 if bid <= 10 else 230.0,
            load_p=mw / s_base,
            load_q=mvar / s_base,
            has_generator=bid in gen_buses,
        ))

    scale_z = s_base / 100.0          # impedance rebase 100 MVA -> s_base
    branches = tuple(
        Branch(from_bus=f, to_bus=t, r=r * scale_z, x=x * scale_z,
               b_shunt=b / scale_z)
        for f, t, r, x, b in _BRANCHES_100
    )

    gens = tuple(
        Generator(bus=bus, s_rated=s, h=h, d=d, xd_t=xd_t,
                  p_set=(loading * s / s_base) if dispatch else 0.0)
        for bus, s, h, dispatch in _UNITS
    )

    return PowerSystem(name="ieee24", buses=tuple(buses), branches=branches,
                       generators=gens, s_base=float(s_base),
                       f_nominal=f_nominal)
