import os
from pathlib import Path
from typing import Optional

from sqlalchemy.engine import Engine
from sqlalchemy.pool import StaticPool
from sqlmodel import Session, SQLModel, create_engine

# Import the table models so they register with the metadata
from thetapress.models import ProfileRecord, RunRecord  # noqa: F401

DATABASE_URL_ENV = "THETAPRESS_DATABASE_URL"
MEMORY_URL = "sqlite://"


def database_url(output_dir: Path) -> str:
    """THETAPRESS_DATABASE_URL, or a SQLite ledger inside the output directory"""
    return os.environ.get(DATABASE_URL_ENV, f"sqlite:///{output_dir / 'ledger.sqlite'}")


def get_engine(url: str) -> Engine:
    if url == MEMORY_URL:
        return create_engine(url, connect_args={"check_same_thread": False}, poolclass=StaticPool)
    if url.startswith("sqlite"):
        return create_engine(url, connect_args={"timeout": 15})
    return create_engine(url, connect_args={"connect_timeout": 15})


def create_tables(engine: Engine) -> None:
    SQLModel.metadata.create_all(engine)


def get_session(engine: Engine) -> Session:
    return Session(engine)


def reset_db(engine: Optional[Engine] = None) -> Engine:
    """Wipe all tables in the database. Use with caution - for testing only!"""
    engine = engine or get_engine(MEMORY_URL)
    SQLModel.metadata.drop_all(engine)
    SQLModel.metadata.create_all(engine)
    return engine
