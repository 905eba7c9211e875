"""Reference model server for the /v1 QG/QA/NLI/embed/spans/generate protocol."""

from .app import create_app
from .config import ServerConfig

__all__ = ["create_app", "ServerConfig"]
__version__ = "0.1.0"
