"""Measurement channel identifiers shared across the toolkit.

The enum definition order is the canonical channel order: wherever a
subset of features appears (dataset tensors, normalization constants,
selection traces), channels are laid out in this order.
"""

from enum import Enum

from .errors import ConfigError


class FeatureId(Enum):
    DELTA_OMEGA = "delta_omega"   # bus frequency deviation, pu
    ROCOF = "rocof"               # rate of change of frequency, pu/s
    VOLT_MAG = "v_mag"            # voltage magnitude deviation, pu


ALL_FEATURES = tuple(FeatureId)


def canonical_order(features):
    """Sort a feature collection into definition order, rejecting dupes."""
    feats = list(features)
    if len(set(feats)) != len(feats):
        raise ConfigError(f"duplicate features in {[f.value for f in feats]}")
    return tuple(sorted(feats, key=list(FeatureId).index))


def parse_features(text):
    """Parse 'delta_omega,rocof' style lists into canonical order."""
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise ConfigError("empty feature list")
    by_value = {f.value: f for f in FeatureId}
    feats = []
    for name in names:
        if name not in by_value:
            raise ConfigError(
                f"unknown feature {name!r}; expected one of "
                f"{sorted(by_value)}"
            )
        feats.append(by_value[name])
    return canonical_order(feats)
