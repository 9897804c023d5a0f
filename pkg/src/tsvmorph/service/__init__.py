from .app import create_app
from .store import Session, SessionStore

__all__ = ["create_app", "Session", "SessionStore"]
