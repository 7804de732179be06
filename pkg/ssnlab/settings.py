"""Django settings for the ssnlab project."""
import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-dev-key-change-in-production")
DEBUG = os.getenv("DEBUG", "True").lower() in ("true", "1", "yes")
ALLOWED_HOSTS = os.getenv("ALLOWED_HOSTS", "localhost,127.0.0.1").split(",")

# Application definition
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "solver",
    "experiments",
]

# Database
# Use DATABASE_URL for production PostgreSQL, otherwise default to SQLite
DATABASE_URL = os.getenv("DATABASE_URL")
if DATABASE_URL and DATABASE_URL.startswith("postgres"):
    try:
        import dj_database_url

        DATABASES = {"default": dj_database_url.parse(DATABASE_URL)}
    except ImportError:
        raise ImportError(
            "dj-database-url is required for PostgreSQL. "
            "Install it with: pip install dj-database-url"
        )
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = os.getenv("TIME_ZONE", "UTC")
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Solver settings
# Dense eigen-diagnostics refuse problems above this state dimension.
SSN_DENSE_THRESHOLD = int(os.getenv("SSN_DENSE_THRESHOLD", "4096"))
# Clustering radius for counting unit eigenvalues.
SSN_UNIT_EIG_TOL = float(os.getenv("SSN_UNIT_EIG_TOL", "1e-8"))
SSN_OUTPUT_DIR = Path(os.getenv("SSN_OUTPUT_DIR", str(BASE_DIR / "results")))
SSN_LOG_LEVEL = os.getenv("SSN_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "solver": {"handlers": ["console"], "level": SSN_LOG_LEVEL, "propagate": False},
        "experiments": {"handlers": ["console"], "level": SSN_LOG_LEVEL, "propagate": False},
    },
}
