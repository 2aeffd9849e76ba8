"""Python bindings for the SIoT community-based edge allocation pipeline."""

import json

from . import _core
from ._core import (
    ConfigError,
    Device,
    Model,
    SiotError,
    SocialGraph,
    StageError,
    build_clor,
    build_sfor,
    build_sor,
    candidate_set,
    compute_metrics,
    generate_devices,
    generate_meetings,
    generate_owner_network,
    geo_distance,
    load_devices,
    louvain,
    modularity,
    response_time,
    save_devices,
)

__all__ = [
    "ConfigError",
    "Device",
    "Model",
    "SiotError",
    "SocialGraph",
    "StageError",
    "allocate",
    "build_clor",
    "build_sfor",
    "build_sor",
    "candidate_set",
    "compute_metrics",
    "config_hash",
    "generate_devices",
    "generate_meetings",
    "generate_owner_network",
    "geo_distance",
    "load_devices",
    "louvain",
    "modularity",
    "response_time",
    "run_pipeline",
    "save_devices",
]


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def run_pipeline(config=None, out_dir=""):
    """Run every stage; returns the metrics report as a dict."""
    return json.loads(_core.run_pipeline(_dump(config), str(out_dir)))


def config_hash(config=None):
    return _core.config_hash(_dump(config))


def allocate(out_dir, requester, ic_mi, msg_mb, config=None, use_oracle=False, model="gbr"):
    """Allocate one task using the artifacts of an earlier run in out_dir."""
    return json.loads(
        _core.allocate(_dump(config), str(out_dir), requester, ic_mi, msg_mb, use_oracle, model)
    )
