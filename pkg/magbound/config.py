import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic import ValidationError

from magbound.errors import InvalidConfigError
from magbound.schemas import SweepConfig

BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")


class Settings:
    project_name: str = "MagBound"
    base_dir: Path = BASE_DIR
    artifact_dir: Path = Path(os.getenv("MAGBOUND_ARTIFACT_DIR", str(BASE_DIR / "artifacts")))

    default_seed: int = int(os.getenv("MAGBOUND_SEED", "1234"))
    n_jobs: int = int(os.getenv("MAGBOUND_N_JOBS", "1"))
    log_level: str = os.getenv("MAGBOUND_LOG_LEVEL", "INFO").upper()


settings = Settings()


# Flat keys of the sweep file and where they land in SweepConfig.
_TOP_LEVEL_KEYS = {
    "gamma_grid",
    "copies",
    "restarts",
    "restart_tol",
    "seed",
    "out",
    "reproducible",
    "independent_qc_measurements",
    "include_qc",
}
_LIST_KEYS = {"gamma_grid", "copies"}


def _parse_value(raw: str) -> Any:
    text = raw.strip()
    if text.lower() in {"true", "yes", "on"}:
        return True
    if text.lower() in {"false", "no", "off"}:
        return False
    return text


def parse_config_lines(lines) -> Dict[str, Any]:
    """
    Parse ``key = value`` lines into the nested dict SweepConfig expects.

    ``#`` starts a comment. ``optimizer.pso.n_particles = 30`` style keys
    nest under ``optimizer``; ``gamma_grid`` and ``copies`` are comma lists.
    """
    data: Dict[str, Any] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in _LIST_KEYS:
            data[key] = [item.strip() for item in raw.split(",") if item.strip()]
        elif key in _TOP_LEVEL_KEYS:
            data[key] = _parse_value(raw)
        elif key.startswith("optimizer."):
            node = data.setdefault("optimizer", {})
            parts = key.split(".")[1:]
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = _parse_value(raw)
        else:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
    return data


def load_sweep_config(path: Path, **overrides: Any) -> SweepConfig:
    path = Path(path)
    if not path.exists():
        raise InvalidConfigError(f"Config file not found: {path}")
    data = parse_config_lines(path.read_text(encoding="utf-8").splitlines())
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SweepConfig.model_validate(data)
    except ValidationError as exc:
        raise InvalidConfigError(str(exc)) from exc
