"""Run configuration: one flat key=value file (or CLI overrides) holding
every tunable constant of the pipeline. Defaults are the protocol values:
1 mm isometric resampling, 6 mm minimum VOI radius, the 3 mm / 5 mm / 15
degree branch admission rule, and the dichotomization cutoffs used in the
contingency analysis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass
class RunConfig:
    # paths
    annotations_dir: str = ""
    masks_dir: str = ""       # per-class subdirs: pleura/ airway/ vessel/ artery/ vein/
    diagnosis_csv: str = ""
    output_dir: str = ""
    train_dir: str = ""       # run directory holding models/, for evaluate

    # geometry
    resample_spacing_mm: float = 1.0
    voi_min_radius_mm: float = 6.0

    # branch admission rule (choice 2)
    attach_d_near_mm: float = 3.0
    attach_d_far_mm: float = 5.0
    attach_max_angle_deg: float = 15.0

    # dichotomization cutoffs
    cutoff_distance_mm: float = 1.0
    cutoff_count_airway: float = 1.0
    cutoff_count_vascular_c1: float = 10.0
    cutoff_count_vascular_c2: float = 3.0
    cutoff_nvol_airway_pct: float = 0.1
    cutoff_nvol_vascular_pct: float = 2.0
    eqd_cutoff_mm: float = 10.0
    texture_solid_min_score: float = 4.0

    # classifier
    l2: float = 1e-4
    balanced: bool = False
    choice: int = 2
    threshold: float = 0.5

    # execution
    workers: int = 1

    def __post_init__(self):
        if self.choice not in (1, 2):
            raise ValueError(f"choice must be 1 or 2, got {self.choice}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def count_cutoff(self, structure: str, choice: int) -> float:
        if structure == "airway":
            return self.cutoff_count_airway
        return self.cutoff_count_vascular_c1 if choice == 1 else self.cutoff_count_vascular_c2

    def nvol_cutoff(self, structure: str) -> float:
        return self.cutoff_nvol_airway_pct if structure == "airway" else self.cutoff_nvol_vascular_pct


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(name: str, raw: str):
    f = _FIELDS[name]
    if f.type in ("bool", bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {name} = {raw!r}")
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("float", float):
        return float(raw)
    return raw.strip()


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a config from an optional key=value file plus overrides.

    File lines are ``key = value``; blank lines and ``#`` comments are
    ignored. Overrides (typically CLI flags) win over file values.
    """
    values: dict = {}
    if path:
        with open(path) as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{ln}: expected 'key = value', got {line!r}")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in _FIELDS:
                    raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
                values[key] = _parse_value(key, raw)
    for key, raw in (overrides or {}).items():
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(RunConfig)]
    return "\n".join(lines) + "\n"


def echo_config(cfg: RunConfig, path: str) -> None:
    """Write the effective config next to the outputs, for reproducibility."""
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))
