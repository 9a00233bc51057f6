from src.app.settings import AppSettings
from src.app.cli import main

__all__ = ["AppSettings", "main"]
