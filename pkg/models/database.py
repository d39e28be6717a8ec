"""
Database configuration and session management for the run ledger.

The engine points at an SQLite file by default; set ``ANGLESET_DATABASE_URL``
(or pass ``--database`` on the command line) to use another database.
Engines are created on first use, one per URL.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Generator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from models.settings import database_url

Base = declarative_base()


def get_engine(url: Optional[str] = None) -> Engine:
    return _engine(url or database_url())


@lru_cache(maxsize=None)
def _engine(url: str) -> Engine:
    engine = create_engine(
        url,
        connect_args={"check_same_thread": False} if url.startswith("sqlite") else {},
    )
    # Register the ledger tables before creating them
    from models import runs  # noqa: F401

    Base.metadata.create_all(bind=engine)
    return engine


def session_factory(url: Optional[str] = None) -> sessionmaker:
    return sessionmaker(autocommit=False, autoflush=False, bind=get_engine(url))


def get_db(url: Optional[str] = None) -> Generator[Session, None, None]:
    db: Session = session_factory(url)()
    try:
        yield db
    finally:
        db.close()
