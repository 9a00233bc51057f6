from __future__ import annotations

import logging

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def configure_logging(level: str = "INFO", quiet: bool = False) -> None:
    """Root handler for the CLI; --quiet keeps warnings and errors only."""
    resolved = logging.WARNING if quiet else getattr(logging, str(level).upper(), logging.INFO)
    logging.basicConfig(level=resolved, format=LOG_FORMAT, force=True)
