"""
SQLAlchemy ORM model for recorded command runs.
"""

from __future__ import annotations

from datetime import datetime

from sqlalchemy import Column, DateTime, Integer, String, Text

from models.database import Base


class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    command = Column(String, nullable=False, index=True)

    # JSON text, as produced by services.ledger
    parameters = Column(Text, nullable=False, default="{}")
    outcome = Column(String, nullable=False)
    summary = Column(Text, nullable=False, default="{}")

    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)
