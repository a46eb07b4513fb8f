"""Service layer: pydantic schemas, handlers, FastAPI app."""
