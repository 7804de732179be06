"""Pytest configuration for the project."""
import os
import sys
from pathlib import Path

import django
import pytest

# Add the project directory to the Python path
BASE_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(BASE_DIR))

# Configure Django settings
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "ssnlab.settings")
django.setup()


@pytest.fixture
def output_dir(tmp_path, settings):
    """Point SSN_OUTPUT_DIR at a per-test directory."""
    settings.SSN_OUTPUT_DIR = tmp_path / "results"
    return settings.SSN_OUTPUT_DIR
