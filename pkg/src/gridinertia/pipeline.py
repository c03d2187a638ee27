"""PMU signal conditioning and dataset assembly.

The default chain turns one simulation into one training sample:

    simulate -> sample_pmu -> scrub_bad_data -> downsample -> add_noise
             -> extract_window

``assemble_dataset`` runs that chain over a (h_sys, probe amplitude)
sweep, splits the samples into train/validation sets with a seeded
permutation, and min-max normalizes every channel using statistics from
the training split only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AssemblyError, GridInertiaError, PipelineError
from .features import FeatureId, canonical_order
from .grid import system_inertia, scale_inertia
from .seeding import STREAM_NOISE, STREAM_SPLIT, derive_rng
from .simulate import PmuRecord, ProbingSignal, SimConfig, sample_pmu, simulate

#: spike threshold in multiples of the per-channel MAD
SPIKE_MAD_FACTOR = 8.0

#: a point is only a spike if it also stands off the channel range by this
SPIKE_RANGE_FLOOR = 0.05

#: fraction of bad points beyond which a channel is unusable
MAX_BAD_FRACTION = 0.20


# ---------------------------------------------------------------------------
# conditioning steps (PmuRecord -> PmuRecord)
# ---------------------------------------------------------------------------

def scrub_bad_data(record):
    """Repair dropouts and impulsive spikes channel by channel.

    Bad points are non-finite samples plus impulsive spikes.  A spike at
    sample k is recognised by the neighbour-midpoint residual
    r_k = x_k - (x_{k-1}+x_{k+1})/2: it must exceed SPIKE_MAD_FACTOR
    times the channel's median absolute deviation of r (and 5% of the
    channel range as an absolute floor), *and* show the impulse
    signature -- residuals at k-1 and k+1 opposite in sign to r_k and at
    least a quarter of its magnitude.  The shape condition is what keeps
    genuine fast transients (e.g. the RoCoF corner when a probe switches
    on) from being eaten: a smooth corner never produces the symmetric
    rebound of an isolated outlier.  Bad points are linearly interpolated
    from good ones.  A channel with more than 20% bad points raises
    PipelineError.  Repair counts land in meta["repairs"].
    """
    data = {}
    repairs = {}
    for key, x in record.data.items():
        x = np.asarray(x, dtype=np.float64)
        bad = ~np.isfinite(x)
        finite = x[~bad]
        if finite.size >= 5:
            resid = np.zeros_like(x)
            resid[1:-1] = x[1:-1] - 0.5 * (x[:-2] + x[2:])
            resid[~np.isfinite(resid)] = 0.0
            med = np.median(resid[1:-1])
            mad = np.median(np.abs(resid[1:-1] - med))
            span = finite.max() - finite.min()
            if mad > 0 and span > 0:
                r = resid[2:-2]
                left = resid[1:-3]
                right = resid[3:-1]
                magnitude = (
                    (np.abs(r - med) > SPIKE_MAD_FACTOR * mad)
                    & (np.abs(r) > SPIKE_RANGE_FLOOR * span)
                )
                shape = (
                    (left * r < 0) & (right * r < 0)
                    & (np.minimum(np.abs(left), np.abs(right))
                       >= 0.25 * np.abs(r))
                )
                spike = np.zeros_like(bad)
                spike[2:-2] = magnitude & shape
                bad |= spike
        n_bad = int(bad.sum())
        if n_bad > MAX_BAD_FRACTION * x.size:
            raise PipelineError(
                f"channel {key}: {n_bad}/{x.size} bad points exceeds the "
                f"{MAX_BAD_FRACTION:.0%} repair limit")
        if n_bad:
            idx = np.arange(x.size, dtype=np.float64)
            good = ~bad
            if not good.any():
                raise PipelineError(f"channel {key}: no good samples")
            x = x.copy()
            x[bad] = np.interp(idx[bad], idx[good], x[good])
        data[key] = x
        repairs[key] = n_bad
    meta = dict(record.meta)
    meta["repairs"] = repairs
    return replace(record, data=data, meta=meta)


def downsample(record, target_rate):
    """Anti-aliased rate reduction to `target_rate`.

    Integral ratios use a moving average over the decimation factor
    followed by decimation (so a channel mean is preserved exactly when
    the factor divides the length); non-integral ratios use a polyphase
    resampler.  Equal rates return the record unchanged.
    """
    if target_rate <= 0:
        raise PipelineError(f"target rate must be positive, got {target_rate}")
    if target_rate > record.rate:
        raise PipelineError(
            f"cannot downsample from {record.rate:g} Hz up to "
            f"{target_rate:g} Hz")
    if target_rate == record.rate:
        return record

    ratio = record.rate / target_rate
    data = {}
    if abs(ratio - round(ratio)) < 1e-9:
        f = int(round(ratio))
        for key, x in record.data.items():
            n_out = (x.size + f - 1) // f
            out = np.empty(n_out)
            for k in range(n_out):
                out[k] = x[k * f:(k + 1) * f].mean()
            data[key] = out
    else:
        from fractions import Fraction

        from scipy.signal import resample_poly

        frac = Fraction(target_rate / record.rate).limit_denominator(1000)
        up, down = frac.numerator, frac.denominator
        for key, x in record.data.items():
            n_out = int(math.floor((x.size - 1) * target_rate / record.rate)) + 1
            data[key] = resample_poly(x, up, down)[:n_out]
    meta = dict(record.meta)
    meta["downsampled_from"] = record.rate
    return replace(record, rate=float(target_rate), data=data, meta=meta)


def add_noise(record, snr_db, seed, key=()):
    """Add white Gaussian noise at a per-channel signal-to-noise ratio.

    Noise power is set from each channel's AC power (variance about its
    mean); a constant channel falls back to its total power; an all-zero
    channel is left noiseless and flagged in meta["silent_channels"].
    `snr_db=None` (or infinity) is the no-noise identity.  `key` extends
    the RNG stream so different samples in a sweep draw independent
    noise.
    """
    if snr_db is None or snr_db == math.inf:
        return record
    if not math.isfinite(snr_db):
        raise PipelineError(f"snr_db must be finite or None, got {snr_db}")
    data = {}
    silent = []
    feat_index = {f: i for i, f in enumerate(FeatureId)}
    for (bus, feat), x in record.data.items():
        power = float(np.var(x))
        if power == 0.0:
            power = float(np.mean(x * x))
        if power == 0.0:
            silent.append((bus, feat.value))
            data[(bus, feat)] = x
            continue
        rng = derive_rng(seed, STREAM_NOISE, *key, bus, feat_index[feat])
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
        data[(bus, feat)] = x + rng.normal(0.0, sigma, size=x.size)
    meta = dict(record.meta)
    meta["snr_db"] = snr_db
    if silent:
        meta["silent_channels"] = silent
    return replace(record, data=data, meta=meta)


def extract_window(record, t0, t1):
    """Cut [t0, t1) (seconds, t1 exclusive) into a feature tensor.

    Returns an (n_buses, n_features, n_steps) float64 array with buses
    sorted ascending and features in canonical order.
    """
    if t0 < 0:
        raise PipelineError(f"window start must be >= 0, got {t0}")
    n_steps = int(round((t1 - t0) * record.rate))
    if n_steps <= 0:
        raise PipelineError(f"window [{t0}, {t1}) is empty at {record.rate:g} Hz")
    i0 = int(round(t0 * record.rate))
    if i0 + n_steps > record.n_samples:
        raise PipelineError(
            f"window [{t0}, {t1}) needs samples up to {i0 + n_steps} but the "
            f"record has {record.n_samples}")
    buses = tuple(sorted(record.buses))
    feats = canonical_order(record.features)
    out = np.empty((len(buses), len(feats), n_steps))
    for bi, bus in enumerate(buses):
        for fi, feat in enumerate(feats):
            out[bi, fi] = record.data[(bus, feat)][i0:i0 + n_steps]
    return out


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    """One training example: channel tensor plus its inertia label."""

    label: float
    tensor: np.ndarray           # float32 (n_buses, n_features, n_steps)
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    """Sweep of samples with a split and normalization state.

    Samples are stored in canonical sweep order (h outer loop ascending,
    probe amplitude inner loop ascending); train/val membership comes
    from a seeded permutation, kept as sorted index tuples.  norm_min and
    norm_max are (n_buses, n_features) arrays from the training split, or
    None before normalization.
    """

    case_name: str
    buses: tuple
    features: tuple
    rate: float
    window: tuple
    snr_db: float | None
    seed: int
    samples: tuple
    train_idx: tuple
    val_idx: tuple
    norm_min: np.ndarray | None
    norm_max: np.ndarray | None
    sweep_h: tuple
    sweep_pe: tuple
    probe: dict
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return len(self.samples)

    @property
    def is_normalized(self):
        return self.norm_min is not None

    def split(self, name):
        if name == "train":
            idx = self.train_idx
        elif name == "val":
            idx = self.val_idx
        elif name == "all":
            idx = tuple(range(self.n_samples))
        else:
            raise PipelineError(f"unknown split {name!r}")
        return idx

    def tensors(self, split="train"):
        """Stack a split into (X float64 [n,b,f,t], y float64 [n])."""
        idx = self.split(split)
        x = np.stack([self.samples[i].tensor for i in idx]).astype(np.float64)
        y = np.array([self.samples[i].label for i in idx])
        return x, y

    def restrict_features(self, features):
        """New dataset keeping only `features` (slices tensors/constants)."""
        feats = canonical_order(features)
        missing = [f.value for f in feats if f not in self.features]
        if missing:
            raise PipelineError(f"features not in dataset: {missing}")
        cols = [self.features.index(f) for f in feats]
        samples = tuple(
            replace(s, tensor=np.ascontiguousarray(s.tensor[:, cols, :]))
            for s in self.samples)
        return replace(
            self, features=feats, samples=samples,
            norm_min=None if self.norm_min is None
            else np.ascontiguousarray(self.norm_min[:, cols]),
            norm_max=None if self.norm_max is None
            else np.ascontiguousarray(self.norm_max[:, cols]))

    def restrict_buses(self, buses):
        """New dataset keeping only channels of `buses`."""
        keep = sorted(set(int(b) for b in buses))
        missing = [b for b in keep if b not in self.buses]
        if missing:
            raise PipelineError(f"buses not in dataset: {missing}")
        rows = [self.buses.index(b) for b in keep]
        samples = tuple(
            replace(s, tensor=np.ascontiguousarray(s.tensor[rows, :, :]))
            for s in self.samples)
        return replace(
            self, buses=tuple(keep), samples=samples,
            norm_min=None if self.norm_min is None
            else np.ascontiguousarray(self.norm_min[rows, :]),
            norm_max=None if self.norm_max is None
            else np.ascontiguousarray(self.norm_max[rows, :]))


def normalize(dataset):
    """Min-max normalize every channel from training-split statistics.

    Channels whose training min equals their max (constant channels) map
    to 0.5 everywhere.  Applying normalize to an already-normalized
    dataset is the identity up to those same constants.
    """
    if not dataset.train_idx:
        raise PipelineError("cannot normalize: empty training split")
    train = np.stack([dataset.samples[i].tensor.astype(np.float64)
                      for i in dataset.train_idx])
    lo = train.min(axis=(0, 3))
    hi = train.max(axis=(0, 3))
    samples = tuple(
        replace(s, tensor=apply_normalization(s.tensor, lo, hi))
        for s in dataset.samples)
    return replace(dataset, samples=samples, norm_min=lo, norm_max=hi)


def apply_normalization(tensor, lo, hi):
    """Scale one (buses, features, steps) tensor by channel constants."""
    x = tensor.astype(np.float64)
    span = hi - lo
    out = np.empty_like(x)
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = (x - lo[:, :, None]) / safe[:, :, None]
    out[degenerate, :] = 0.5
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# sweep assembly
# ---------------------------------------------------------------------------

def default_h_sweep():
    """11 blended-inertia targets, 3 s to 8 s inclusive."""
    return tuple(np.linspace(3.0, 8.0, 11))


def default_pe_sweep():
    """100 probing amplitudes, 0.001 pu to 0.01 pu inclusive."""
    return tuple(np.linspace(0.001, 0.01, 100))


def assemble_dataset(system, sweep_h=None, sweep_pe=None, *, buses=None,
                     features=(FeatureId.DELTA_OMEGA, FeatureId.ROCOF),
                     window=(0.0, 1.0), snr_db=None, seed=0,
                     probe_bus=None, probe_kind="step", probe_start=0.0,
                     probe_width=0.1, probe_period=0.02,
                     pmu_rate=200.0, target_rate=200.0,
                     sim=None, train_fraction=0.8, run_normalize=True,
                     trace_sink=None):
    """Simulate a (h_sys, amplitude) sweep and package it for training.

    Samples are generated in canonical order (h ascending outer, probe
    amplitude ascending inner), split by a seeded permutation, then
    normalized channel-wise from the training split.  Any failure in one
    run raises AssemblyError tagged with the sweep point.

    trace_sink, when given, is called as trace_sink(index, h, p_e, trace)
    with each run's full-resolution SimulationTrace before any PMU
    processing, e.g. to archive raw traces.
    """
    sweep_h = default_h_sweep() if sweep_h is None else tuple(float(h) for h in sweep_h)
    sweep_pe = default_pe_sweep() if sweep_pe is None else tuple(float(p) for p in sweep_pe)
    if not sweep_h or not sweep_pe:
        raise AssemblyError("sweeps must be non-empty")
    if list(sweep_h) != sorted(sweep_h) or list(sweep_pe) != sorted(sweep_pe):
        raise AssemblyError("sweep values must be ascending")
    feats = canonical_order(features)
    cfg = sim if sim is not None else SimConfig(seed=seed)
    if buses is None:
        buses = system.generator_buses()
    buses = tuple(sorted(set(int(b) for b in buses)))
    if probe_bus is None:
        probe_bus = max(system.buses, key=lambda b: (b.load_p, b.id)).id

    samples = []
    for hi, h in enumerate(sweep_h):
        scaled = scale_inertia(system, h)
        for pj, pe in enumerate(sweep_pe):
            k = hi * len(sweep_pe) + pj
            try:
                probe = ProbingSignal(bus=probe_bus, kind=probe_kind,
                                      amplitude=pe, start=probe_start,
                                      width=probe_width, period=probe_period)
                trace = simulate(scaled, probe, cfg)
                if trace_sink is not None:
                    trace_sink(k, float(h), float(pe), trace)
                rec = sample_pmu(trace, buses, pmu_rate)
                rec = scrub_bad_data(rec)
                rec = downsample(rec, target_rate)
                rec = add_noise(rec, snr_db, seed, key=(k,))
                tensor = extract_window(rec, window[0], window[1])
            except GridInertiaError as exc:
                raise AssemblyError(
                    f"sweep point h={h:g}, amplitude={pe:g} failed: {exc}",
                    h=h, p_e=pe) from exc
            samples.append(Sample(
                label=float(h),
                tensor=tensor[:, [list(FeatureId).index(f) for f in feats], :]
                .astype(np.float32),
                meta={"p_e": float(pe), "h_sys": system_inertia(scaled).h_sys,
                      "repairs": sum(rec.meta.get("repairs", {}).values())}))

    n = len(samples)
    n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise AssemblyError(
            f"train fraction {train_fraction} leaves an empty split for "
            f"{n} samples")
    perm = derive_rng(seed, STREAM_SPLIT).permutation(n)
    train_idx = tuple(sorted(int(i) for i in perm[:n_train]))
    val_idx = tuple(sorted(int(i) for i in perm[n_train:]))

    ds = Dataset(
        case_name=system.name, buses=buses, features=feats,
        rate=float(target_rate), window=(float(window[0]), float(window[1])),
        snr_db=None if snr_db is None or snr_db == math.inf else float(snr_db),
        seed=int(seed), samples=tuple(samples),
        train_idx=train_idx, val_idx=val_idx,
        norm_min=None, norm_max=None,
        sweep_h=sweep_h, sweep_pe=sweep_pe,
        probe={"bus": int(probe_bus), "kind": probe_kind,
               "start": float(probe_start), "width": float(probe_width),
               "period": float(probe_period)},
        meta={"pmu_rate": float(pmu_rate), "dt": cfg.dt,
              "duration": cfg.duration, "droop_gain": cfg.droop_gain,
              "governor_tc": cfg.governor_tc})
    if run_normalize:
        ds = normalize(ds)
    return ds
