"""
Configuration Settings for the Near-RT RIC security simulator
Centralized defaults for easy tuning; scenarios override per run
"""

import logging
import os
from pathlib import Path
try:
    # Optional: load .env from repo root if python-dotenv is available
    from dotenv import load_dotenv
    dotenv_path = Path(__file__).parent.parent / ".env"
    if dotenv_path.exists():
        load_dotenv(dotenv_path)
except Exception:
    pass


BASE_DIR = Path(__file__).parent
SCENARIOS_DIR = BASE_DIR / "scenarios"
RESULTS_DIR = Path(os.getenv("RICSIM_RESULTS_DIR", BASE_DIR.parent / "results"))

# Simulated time
TICK_MS = 10  # One tick = lower edge of the near-RT control loop

# Radio model
PATH_LOSS_CONST_DB = 128.1
PATH_LOSS_SLOPE_DB = 37.6  # per decade of km
NOISE_FLOOR_DBM = -104.0
PER_UE_CAP_MBPS = 100.0
NEIGHBOUR_SLOTS = 3
RSRP_SENTINEL_DBM = -156.0

# Platform capacities
QUEUE_CAPACITY = 64  # Q: per-xApp RMR inbox
SUB_WINDOW_CAPACITY = 128  # S: pending E2 subscriptions per window
CONFLICT_BUDGET = 32  # B: control requests evaluated per tick
SUBSCRIPTION_LEASE_TICKS = 20
ADMIN_ID = "ric-admin"
E2TERM_ID = "e2term"

# Apps
RIDGE_LAMBDA = 0.1
RETRAIN_PERIOD = 100
TRAIN_WINDOW = 100
RAPP_PERIOD = 100  # Non-RT loop, > 1 s
HYSTERESIS_MARGIN = 1.2
ANOMALY_THRESHOLD = 3.0
ANOMALY_WINDOW = 10
SLA_MBPS = 5.0
LOAD_THRESHOLD = 70.0
TS_PRIORITY = 5
TS_MAX_HANDOVERS_PER_TICK = 2

# Defences
PROFILE_TICKS = 200
PROFILE_MIN_TICKS = 100
LIVE_WINDOW = 5
PROFILE_EPSILON = 0.1
PROFILE_THRESHOLD = 5.0
HIGH_RISK_FACTOR = 0.6
RISK_WEIGHTS = {"write": 1, "e2_control": 2, "route_update": 1}
# Zero-trust microsegmentation: directed zone pairs allowed to exchange messages
ZONE_EDGES = (("ingest", "analytics"), ("analytics", "control"), ("policy", "control"))

# Attacks
MEA_FIDELITY_TOLERANCE = 0.5  # Mbps

# Harness
WORKERS = int(os.getenv("RICSIM_WORKERS", "1"))
LOG_LEVEL = os.getenv("RICSIM_LOG_LEVEL", "INFO")  # DEBUG, INFO, WARNING, ERROR
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(level: str = None) -> None:
    """Configure the root logger once for CLI and library use."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
    )


def validate_config() -> list:
    """Return a list of configuration error messages (empty if OK). """
    errors = []
    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        errors.append(f"RICSIM_LOG_LEVEL must be DEBUG/INFO/WARNING/ERROR, got {LOG_LEVEL!r}")
    if WORKERS < 1:
        errors.append(f"RICSIM_WORKERS must be >= 1, got {WORKERS}")
    if PROFILE_TICKS < PROFILE_MIN_TICKS:
        errors.append("PROFILE_TICKS must cover at least PROFILE_MIN_TICKS ticks")
    if not SCENARIOS_DIR.exists():
        errors.append(f"Bundled scenarios missing: {SCENARIOS_DIR}")

    return errors
