"""Shapley-value credit assignment for cooperative agents.

Thin wrappers over the C++ core; structured results come back as plain
dicts and lists.
"""

import json

from . import _shapkit
from ._shapkit import (
    BackendError,
    DataError,
    ShapkitError,
    UsageError,
    coalition_weight_sum,
    shapley_exact,
    shapley_game_file,
    shapley_sampled,
    shapley_two_agent,
    side_payments,
)

__all__ = [
    "BackendError",
    "DataError",
    "ShapkitError",
    "UsageError",
    "coalition_weight_sum",
    "parse_message",
    "render_message",
    "run_episode",
    "shapley_exact",
    "shapley_game_file",
    "shapley_sampled",
    "shapley_two_agent",
    "side_payments",
    "trajectory_shapley",
    "wev_report",
]


def parse_message(text):
    """Parse one tagged negotiation message into a dict."""
    return json.loads(_shapkit.parse_message(text))


def render_message(msg):
    """Inverse of parse_message."""
    return _shapkit.render_message(json.dumps(msg))


def wev_report(path, weights=None):
    """Rows of the value-range report for a contribution CSV/JSON file."""
    return json.loads(_shapkit.wev_report(str(path), str(weights) if weights else ""))


def run_episode(env, policies, pipeline="SC", seed=0, config=None):
    """Run one episode; the trajectory comes back as JSONL text."""
    out = _shapkit.run_episode(env, list(policies), pipeline, seed, json.dumps(config) if config else "")
    return json.loads(out)


def trajectory_shapley(trajectory, mode="full", counterfactual="ablate_log"):
    """Per-agent values from a JSONL trajectory (text)."""
    return _shapkit.trajectory_shapley(trajectory, mode, counterfactual)
