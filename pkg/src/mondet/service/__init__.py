"""HTTP service wrapping the pipeline; run with `uvicorn mondet.service:app`."""

from .app import create_app

app = create_app()

__all__ = ["app", "create_app"]
