# config/app_config.py
# ---------------------------------------------------------
# ⚖️ Fair Prep - Config (Environment-based)
# ---------------------------------------------------------

import os
from dotenv import load_dotenv

# ---------------------------------------------------------
# 🌍 Load .env File (Development Mode)
# ---------------------------------------------------------
ENV_FILE = os.getenv("FAIRPREP_ENV_FILE", ".env")
if os.path.exists(ENV_FILE):
    load_dotenv(ENV_FILE)


def _env_int(name: str, default: int) -> int:
    """Read an integer setting, falling back to the default on garbage."""
    try:
        return int(os.getenv(name, default))
    except (TypeError, ValueError):
        return default


def _env_float(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, default))
    except (TypeError, ValueError):
        return default


# ---------------------------------------------------------
# 🧱 Application Metadata
# ---------------------------------------------------------
APP_NAME = os.getenv("APP_NAME", "Fair Prep")
HASH_NAME = os.getenv("HASH_NAME", "fairprep")
APP_VERSION = os.getenv("APP_VERSION", "1.0.0")
ABOUT_APP = os.getenv(
    "ABOUT_APP",
    "Task-tailored fairness pre-processing for tabular supervised learning.",
)

# Stamp written into every output file next to the config echo.
CODE_VERSION = f"{HASH_NAME}-{APP_VERSION}"

# ---------------------------------------------------------
# 📁 Output & Logging
# ---------------------------------------------------------
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
LOG_DIR = os.getenv("LOG_DIR", "logs")
LOG_TO_FILE = os.getenv("LOG_TO_FILE", "1") not in ("0", "false", "False")
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "runs")

# ---------------------------------------------------------
# 🧮 Training Defaults
# ---------------------------------------------------------
DEFAULT_EPOCHS = _env_int("DEFAULT_EPOCHS", 200)
DEFAULT_BATCH_SIZE = _env_int("DEFAULT_BATCH_SIZE", 200)
DEFAULT_HIDDEN_WIDTH = _env_int("DEFAULT_HIDDEN_WIDTH", 64)
DEFAULT_LEARNING_RATE = _env_float("DEFAULT_LEARNING_RATE", 1e-3)
DEFAULT_MULTIPLIER_RATE = _env_float("DEFAULT_MULTIPLIER_RATE", 1.0)
DEFAULT_DROPOUT = _env_float("DEFAULT_DROPOUT", 0.1)
DEFAULT_TEMPERATURE = _env_float("DEFAULT_TEMPERATURE", 0.5)
DEFAULT_CRITIC_STEPS = _env_int("DEFAULT_CRITIC_STEPS", 300)
DEFAULT_KNN_NEIGHBORS = _env_int("DEFAULT_KNN_NEIGHBORS", 15)
