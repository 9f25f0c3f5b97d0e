"""
Django settings for the drivegames project.

Game, kinematic and harness defaults are read from the environment (or an
optional .env next to manage.py) so experiment sweeps can be re-parameterized
without touching code.
"""

from pathlib import Path
import os
from decouple import config, Csv
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")


SECRET_KEY = config("SECRET_KEY", default="drivegames-local-only-key")

DEBUG = config("DJANGO_DEBUG", cast=bool, default=False)

ALLOWED_HOSTS = config("ALLOWED_HOSTS", cast=Csv(), default="localhost")


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'kinematics',
    'gamecore',
    'nonstrategic',
    'strategic',
    'robust',
    'oracle',
    'harness',
    'runner',
]

MIDDLEWARE = []


# Database
# SQLite unless DB_ENGINE points at postgresql (psycopg).

DB_ENGINE = config("DB_ENGINE", default="sqlite3")

if DB_ENGINE == "postgresql":
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.postgresql",
            "NAME": os.getenv("DB_NAME"),
            "USER": os.getenv("DB_USER"),
            "PASSWORD": os.getenv("DB_PASSWORD"),
            "HOST": os.getenv("DB_HOST", "127.0.0.1"),
            "PORT": os.getenv("DB_PORT", "5432"),
        }
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": config("DB_NAME", default=str(BASE_DIR / "drivegames.sqlite3")),
        }
    }


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ── Logging ───────────────────────────────────────────────────────────────────
# stderr only; stdout belongs to command output.
LOG_LEVEL = config("LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {"format": "%(asctime)s %(levelname)s %(name)s %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "verbose",
        },
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False}
        for app in ("kinematics", "gamecore", "nonstrategic", "strategic",
                    "robust", "oracle", "harness", "runner")
    },
}


# ── Kinematics ────────────────────────────────────────────────────────────────
KINEMATICS_DT_S = config("KINEMATICS_DT_S", cast=float, default=0.1)
KINEMATICS_V_MAX = config("KINEMATICS_V_MAX", cast=float, default=14.0)
KINEMATICS_A_MIN = config("KINEMATICS_A_MIN", cast=float, default=-4.5)
KINEMATICS_A_MAX = config("KINEMATICS_A_MAX", cast=float, default=3.0)
KINEMATICS_JERK_MAX = config("KINEMATICS_JERK_MAX", cast=float, default=10.0)
KINEMATICS_N_SAMPLES = config("KINEMATICS_N_SAMPLES", cast=int, default=3)
# lattice (wait in [0, v), proceed in [v, v_max]) or reachable (clipped to one period of the limits)
KINEMATICS_TARGET_BAND = config("KINEMATICS_TARGET_BAND", default="lattice")

# ── Game ──────────────────────────────────────────────────────────────────────
GAME_HORIZON_S = config("GAME_HORIZON_S", cast=float, default=6.0)
GAME_PERIOD_S = config("GAME_PERIOD_S", cast=float, default=2.0)
GAME_DISCOUNT = config("GAME_DISCOUNT", cast=float, default=0.9)
GAME_SIGMOID_ALPHA = config("GAME_SIGMOID_ALPHA", cast=float, default=1.5)
GAME_SIGMOID_D0 = config("GAME_SIGMOID_D0", cast=float, default=2.0)
# empty → one extra horizon (K_c = K)
GAME_CONTINUATION_STAGES = config("GAME_CONTINUATION_STAGES", default="")
GAME_TYPE_GRID = config(
    "GAME_TYPE_GRID",
    cast=Csv(cast=float),
    default="-1,-0.5,0,0.5,1",
)
STRATEGIC_QLK_LAMBDA = config("STRATEGIC_QLK_LAMBDA", cast=float, default=1.0)

# ── Harness ───────────────────────────────────────────────────────────────────
HARNESS_CRASH_GAP_M = config("HARNESS_CRASH_GAP_M", cast=float, default=0.1)
HARNESS_SCENARIO_DIR = BASE_DIR / "harness" / "scenarios"
HARNESS_JOBS = config("HARNESS_JOBS", cast=int, default=0)  # 0 → logical cores
HARNESS_OUTPUT_DIR = Path(config("HARNESS_OUTPUT_DIR", default=str(BASE_DIR / "out")))
