"""Interactive session service: intent rules, session engine, HTTP app."""

from .engine import SessionEngine, SessionNotFound, screen_to_view  # noqa: F401
from .intent import API_GET_INFO, IntentSkeleton, parse_intent  # noqa: F401
from .app import build_engine, create_app, serve  # noqa: F401
