"""Config-file parsing and result emission.

Config files are flat "key = value" text; '#' starts a comment.  Values
parse as int, float, bool, or comma-separated lists thereof; unknown keys
are errors so typos fail loudly.  CSV is the canonical output; every run
also writes a JSON summary carrying provenance (seed, RNG identity, git
commit, config echo).  Wall-clock metadata lives only in the JSON so CSV
bodies stay byte-identical across reruns.
"""

from __future__ import annotations

import json
import subprocess
import time
from pathlib import Path

from ..errors import InvalidConfig
from .. import __version__
from .rng import RNG_ID

# every key any experiment understands; per-kind requirements are checked
# by the experiment runners themselves
KNOWN_KEYS = {
    "kind", "seed", "threads", "out",
    "K", "r", "L", "W", "beta", "beta_init", "snr_db", "sigma_n_sq",
    "N", "N_init",
    "max_iters", "tol", "dump_every",
    "L_list", "W_list", "include_io", "tol_beta", "eta_tol",
    "iters", "trials", "detector", "beta_list", "snr_db_list",
    "middle_only", "per_iteration",
    "blocks",
    "beta_min", "beta_max", "beta_steps", "gamma", "profile",
    "plot",
}

_BOOL = {"true": True, "false": False, "yes": True, "no": False,
         "1": True, "0": False}


def _parse_scalar(tok: str):
    tok = tok.strip()
    low = tok.lower()
    if low in _BOOL:
        return _BOOL[low]
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    return tok


def parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_parse_scalar(t) for t in raw.split(",") if t.strip()]
    return _parse_scalar(raw)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        out[key] = parse_value(raw)
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def apply_overrides(config: dict, overrides) -> dict:
    merged = dict(config)
    for item in overrides or []:
        if "=" not in item:
            raise InvalidConfig(f"override {item!r} must look like key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise InvalidConfig(f"unknown key {key!r}")
        merged[key] = parse_value(raw)
    return merged


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _git_commit():
    try:
        return subprocess.run(["git", "rev-parse", "HEAD"],
                              capture_output=True, text=True, timeout=5,
                              check=True).stdout.strip()
    except Exception:
        return None


def write_summary(out_dir, kind: str, config: dict, outputs,
                  started: float, extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "experiment": kind,
        "config": {k: config[k] for k in sorted(config)},
        "seed": config.get("seed", 0),
        "rng": RNG_ID,
        "git_commit": _git_commit(),
        "package_version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.time() - started, 3),
    }
    if extra:
        payload.update(extra)
    path = out_dir / f"{kind}_summary.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def wilson_interval(errors: int, bits: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if bits == 0:
        return 0.0, 0.0, 1.0
    p = errors / bits
    denom = 1.0 + z * z / bits
    center = (p + z * z / (2 * bits)) / denom
    half = z * ((p * (1 - p) / bits + z * z / (4 * bits * bits)) ** 0.5) / denom
    return p, max(center - half, 0.0), min(center + half, 1.0)
