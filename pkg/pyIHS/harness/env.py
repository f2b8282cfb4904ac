"""Module reading environment settings for experiment output."""

import os

from dotenv import load_dotenv


load_dotenv()

DEFAULT_OUTPUT_ROOT: str = "runs"


def output_root() -> str:
    """Root directory for run artifacts, from PYIHS_OUTPUT_ROOT."""
    return os.getenv("PYIHS_OUTPUT_ROOT") or DEFAULT_OUTPUT_ROOT
