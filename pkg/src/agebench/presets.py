"""Named experiment presets reproducing the reference parameterizations.

Each preset expands to a list of (label, spec-dict) runs; the dicts use the
same schema as user-supplied experiment files. Grids are package choices
covering the plotted ranges, documented here rather than taken from any
tabulated source.
"""
from __future__ import annotations

__all__ = ["PRESET_NAMES", "expand_preset"]

PRESET_NAMES = ("fig3", "fig4", "fig5", "fig6")

_SIM_DEFAULTS = {
    "seed": 1,
    "target_delivered_updates": 600_000,
    "sampled_moments": 1_000_000,
    "warmup_fraction": 0.02,
    "batches": 30,
}


def _fig3():
    spec = {
        "schema": 1,
        "system": {
            "rates": [0.2, 0.4],
            "service": {"kind": "exponential", "mu": 1.0},
            "thresholds_aoi": [8.0, 8.0],
            "thresholds_paoi": [8.625, 8.625],
        },
        "grid": {"start": 0.0, "stop": 20.0, "num": 21},
        "service_kinds": ["exponential", "deterministic", "uniform"],
        "sim": dict(_SIM_DEFAULTS),
    }
    return [("fig3", spec)]


def _fig4():
    runs = []
    for metric in ("AoI", "PAoI"):
        for t1 in (5.0, 10.0, 15.0):
            spec = {
                "schema": 1,
                "problem": {
                    "metric": metric,
                    "thresholds": [t1, 10.0],
                    "total_rate": 0.8,
                    "service_rate": 1.0,
                },
                "sweep": {
                    "variable": "source_rate",
                    "source": 1,
                    "grid": {"start": 0.02, "stop": 0.78, "num": 77},
                },
            }
            runs.append((f"fig4_{metric.lower()}_t1_{t1:g}", spec))
    return runs


def _total_rate_runs(metric: str, tag: str):
    runs = []
    for pair in ((7.5, 7.5), (5.0, 10.0), (2.0, 13.0)):
        spec = {
            "schema": 1,
            "problem": {
                "metric": metric,
                "thresholds": list(pair),
                "total_rate": 0.8,  # placeholder; the sweep replaces it
                "service_rate": 1.0,
            },
            "sweep": {
                "variable": "total_rate",
                "grid": {"start": 0.2, "stop": 1.2, "num": 21},
            },
        }
        runs.append((f"{tag}_{metric.lower()}_t_{pair[0]:g}_{pair[1]:g}", spec))
    return runs


def expand_preset(name: str):
    if name == "fig3":
        return _fig3()
    if name == "fig4":
        return _fig4()
    if name == "fig5":
        return _total_rate_runs("PAoI", "fig5")
    if name == "fig6":
        return _total_rate_runs("AoI", "fig6")
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
