"""Run configuration: documented defaults, a plain-text config file format,
and strict validation.

Config files hold ``key = value`` lines; ``#`` starts a comment and blank
lines are ignored.  Every key has a documented default, unknown keys are
rejected, and the fully resolved configuration is echoed into each command's
output directory so a run can be reproduced from its artifacts alone.
"""

import math
from collections import OrderedDict

import numpy as np

from .errors import ConfigError
from .features import parse_features


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_float(text):
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {text!r}")
    return value


def _parse_float_or_none(text):
    if text.strip().lower() == "none":
        return None
    return _parse_float(text)


def _parse_float_or_auto(text):
    if text.strip().lower() == "auto":
        return None
    return _parse_float(text)


def _parse_mu(text):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    value = _parse_float(text)
    if value <= 0.0:
        raise ConfigError(f"mu must be positive, got {text!r}")
    return value


def _parse_sweep(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep must be min:max:count, got {text!r}")
    lo, hi = _parse_float(parts[0]), _parse_float(parts[1])
    count = _parse_int(parts[2])
    if count < 1:
        raise ConfigError(f"sweep count must be >= 1, got {count}")
    if hi < lo:
        raise ConfigError(f"sweep must be ascending, got {text!r}")
    if count == 1 and hi != lo:
        raise ConfigError(f"single-point sweep needs min == max, got {text!r}")
    return np.linspace(lo, hi, count)


def _parse_window(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must be t0:t1, got {text!r}")
    t0, t1 = _parse_float(parts[0]), _parse_float(parts[1])
    if t0 < 0.0 or t1 <= t0:
        raise ConfigError(f"window needs 0 <= t0 < t1, got {text!r}")
    return (t0, t1)


def _parse_intlist(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            out.append(_parse_int(part))
    if not out:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}")
    return tuple(out)


def _parse_features_key(text):
    return parse_features(text)


def _choice(*options):
    def parse(text):
        value = text.strip()
        if value not in options:
            raise ConfigError(
                f"expected one of {', '.join(options)}; got {text!r}")
        return value
    return parse


def _parse_str(text):
    return text.strip()


# key -> (default string, parser, help)
SCHEMA = OrderedDict([
    # general
    ("case", ("ieee24", _parse_str,
              "power-system case: 'ieee24' or a path to a case file")),
    ("seed", ("0", _parse_int, "global seed; all randomness derives from it")),
    # dataset / simulation
    ("h_sweep", ("3:8:11", _parse_sweep,
                 "inertia sweep min:max:count (seconds)")),
    ("pe_sweep", ("0.001:0.01:100", _parse_sweep,
                  "probing amplitude sweep min:max:count (pu)")),
    ("window", ("0:1", _parse_window, "extraction window t0:t1 (seconds)")),
    ("features", ("delta_omega,rocof", _parse_features_key,
                  "PMU channels: subset of delta_omega,rocof,v_mag")),
    ("snr_db", ("none", _parse_float_or_none,
                "measurement noise SNR in dB; 'none' = clean")),
    ("buses", ("generators", _parse_str,
               "observed buses: 'generators', 'all', or comma-separated ids")),
    ("probe_bus", ("auto", _parse_str,
                   "probing injection bus id, or 'auto' (highest-load bus)")),
    ("probe_kind", ("step", _choice("step", "pulse", "prbs"),
                    "probing waveform")),
    ("probe_start", ("0.0", _parse_float, "probe switch-on time (s)")),
    ("probe_width", ("0.1", _parse_float, "pulse width (s, pulse kind only)")),
    ("probe_period", ("0.02", _parse_float, "chip period (s, prbs kind only)")),
    ("pmu_rate", ("200", _parse_float, "PMU reporting rate (samples/s)")),
    ("target_rate", ("200", _parse_float,
                     "post-downsampling rate fed to the estimators")),
    ("train_fraction", ("0.8", _parse_float, "train split fraction")),
    ("dt", ("0.001", _parse_float, "simulation step (s)")),
    ("duration", ("2.0", _parse_float, "simulated time span (s)")),
    ("droop_gain", ("20.0", _parse_float, "governor droop gain (pu)")),
    ("governor_tc", ("0.5", _parse_float, "governor time constant (s)")),
    ("raw_traces", ("false", _parse_bool,
                    "also save full-resolution per-run traces")),
    # training / evaluation
    ("family", ("lrcn", _choice("dnn", "cnn", "lrcn", "gcn"),
                "estimator architecture")),
    ("epochs", ("500", _parse_int, "maximum training epochs")),
    ("batch_size", ("32", _parse_int, "minibatch size")),
    ("base_lr", ("auto", _parse_float_or_auto,
                 "initial learning rate; 'auto' = family default")),
    ("momentum", ("0.0", _parse_float, "SGD momentum coefficient")),
    ("lstm_variant", ("standard", _choice("standard", "single_gate"),
                      "LSTM cell: 3-gate standard or reduced single-gate")),
    ("lr_factor", ("0.5", _parse_float, "plateau learning-rate multiplier")),
    ("lr_patience", ("50", _parse_int,
                     "epochs without improvement before a rate cut")),
    ("min_lr", ("1e-6", _parse_float, "learning-rate floor")),
    ("early_stop", ("200", _parse_int,
                    "stop after this many epochs without a new best")),
    ("mu", ("0.5", _parse_mu,
            "accuracy tolerance in seconds; 'inf' counts everything")),
    ("split", ("val", _choice("train", "val", "all"),
               "dataset split used for evaluation")),
    # feature selection
    ("fs_seeds", ("0", _parse_intlist,
                  "model seeds averaged per candidate subset")),
    ("fs_epochs", ("200", _parse_int, "training epochs per candidate subset")),
    # PMU placement
    ("budgets", ("2,3,4,5", _parse_intlist, "PMU budgets to solve")),
    ("zgib", ("true", _parse_bool,
              "augment observability with zero-generation-injection buses")),
    ("zgib_mode", ("neighbor_pairs", _choice("neighbor_pairs", "zgib_links"),
                   "ZGIB link interpretation")),
    ("objective", ("max", _choice("max", "full"),
                   "max = best coverage under budget; full = fewest PMUs")),
])


class RunConfig:
    """Resolved, typed configuration values."""

    def __init__(self, raw):
        self._raw = dict(raw)
        self._typed = {}
        for key, (_, parser, _) in SCHEMA.items():
            try:
                self._typed[key] = parser(self._raw[key])
            except ConfigError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None

    def __getitem__(self, key):
        return self._typed[key]

    def raw(self, key):
        return self._raw[key]

    def echo(self):
        """Render the resolved configuration as config-file text."""
        lines = ["# resolved configuration"]
        for key in SCHEMA:
            lines.append(f"{key} = {self._raw[key]}")
        return "\n".join(lines) + "\n"


def default_config_text():
    """The documented defaults, as a ready-to-edit config file."""
    lines = ["# configuration defaults; every key shown with its default value"]
    for key, (default, _, help_text) in SCHEMA.items():
        lines.append(f"# {help_text}")
        lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)


def parse_config_file(path):
    """Read a config file into a raw key -> string dict."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        raw[key] = value.strip()
    return raw


def resolve_config(config_path=None, overrides=None):
    """Merge defaults <- config file <- overrides into a RunConfig.

    overrides maps schema keys to raw strings (from CLI flags); unknown
    keys anywhere raise ConfigError.
    """
    raw = {key: default for key, (default, _, _) in SCHEMA.items()}
    if config_path is not None:
        raw.update(parse_config_file(config_path))
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            raw[key] = str(value)
    return RunConfig(raw)
