"""Scenario runner: config in, CSVs and figures out."""

from __future__ import annotations

import os

from .config import DEFAULTS, ConfigError, ScenarioConfig, load_config
from .scenarios import SCENARIOS, ScenarioResult

__all__ = ["SCENARIOS", "DEFAULTS", "ConfigError", "ScenarioConfig", "ScenarioResult", "load_config",
           "run_scenario"]


def run_scenario(cfg: ScenarioConfig, out_dir) -> ScenarioResult:
    """Dump the resolved config to ``out_dir/config.ini`` and run the scenario."""
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(cfg.dump())
    return SCENARIOS[cfg.scenario](cfg, out_dir)
