"""Flat key=value run configuration.

Every tunable in the pipeline lives here with its default; a config file
overrides defaults, the NIGHTSHIFT_SEED environment variable overrides the
seed, and CLI flags override last. Unknown keys are rejected. Each CLI run
writes its fully resolved configuration back out, and feeding that echo in
as the config reproduces the run bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

SEED_ENV_VAR = "NIGHTSHIFT_SEED"


@dataclass
class RunConfig:
    # reproducibility
    seed: int = 0
    # descriptor extraction
    sift_scales: tuple[int, ...] = (4, 6, 8, 10)
    sift_stride: int = 4
    # vocabulary / aggregation / projection
    vocab_k: int = 16
    kmeans_iters: int = 100
    intra_norm: bool = False
    pca_dim: int = 64
    # translator training
    epochs: int = 40
    lr_g: float = 2e-4
    lr_d: float = 1e-4
    lambda_cyc: float = 10.0
    crop: int = 64
    random_flip: bool = True
    base_width: int = 16
    res_encoder: int = 2
    res_decoder: int = 2
    disc_heads: int = 3
    discriminators: str = "CLG"
    relativistic: bool = False
    paper_literal_msweight: bool = False
    # retrieval / evaluation
    dual: bool = False
    hist_eq: bool = False
    thresholds: tuple[tuple[float, float], ...] = ((5.0, 10.0), (0.5, 5.0), (0.25, 2.0))


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"config key {key!r}: cannot parse boolean from {raw!r}")


def _parse_int_tuple(raw: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse integer list from {raw!r}") from None


def _parse_thresholds(raw: str, key: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 2:
            raise ValueError(f"config key {key!r}: expected m:deg pairs, got {part!r}")
        try:
            pairs.append((float(bits[0]), float(bits[1])))
        except ValueError:
            raise ValueError(f"config key {key!r}: non-numeric threshold {part!r}") from None
    if not pairs:
        raise ValueError(f"config key {key!r}: no threshold pairs in {raw!r}")
    return tuple(pairs)


def _parse_value(key: str, raw: str, default) -> object:
    if key == "thresholds":
        return _parse_thresholds(raw, key)
    if key == "sift_scales":
        return _parse_int_tuple(raw, key)
    if isinstance(default, bool):
        return _parse_bool(raw, key)
    if isinstance(default, int):
        try:
            return int(raw.strip())
        except ValueError:
            raise ValueError(f"config key {key!r}: cannot parse integer from {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw.strip())
        except ValueError:
            raise ValueError(f"config key {key!r}: cannot parse float from {raw!r}") from None
    return raw.strip()


def _render_value(key: str, value) -> str:
    if key == "thresholds":
        return ",".join(f"{m!r}:{deg!r}" for m, deg in value)
    if key == "sift_scales":
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse `key = value` lines; `#` starts a comment; unknown keys fail."""
    defaults = RunConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(defaults)}
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _parse_value(key, raw, known[key])
    return out


def resolve_config(
    path: str | Path | None = None,
    overrides: dict[str, object] | None = None,
    apply_env: bool = True,
) -> RunConfig:
    """Defaults <- config file <- NIGHTSHIFT_SEED <- explicit overrides."""
    cfg = RunConfig()
    if path is not None:
        text = Path(path).read_text()
        cfg = replace(cfg, **parse_config_text(text, source=str(path)))
    if apply_env and SEED_ENV_VAR in os.environ:
        raw = os.environ[SEED_ENV_VAR]
        try:
            cfg = replace(cfg, seed=int(raw))
        except ValueError:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Serialize a config so it parses back to an identical RunConfig."""
    lines = [f"{f.name} = {_render_value(f.name, getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
