"""
Run ledger.

Each command can append its parameters, outcome and JSON summary to the
``runs`` table so that constructions and certificates can be compared
across sessions.
"""

from __future__ import annotations

import json
import logging
from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from models.errors import InvalidInputError
from models.runs import RunRecord

logger = logging.getLogger(__name__)


def _dumps(value: Dict[str, Any]) -> str:
    return json.dumps(value, sort_keys=True, default=str)


def record_run(
    db: Session,
    command: str,
    parameters: Dict[str, Any],
    outcome: str,
    summary: Optional[Dict[str, Any]] = None,
) -> RunRecord:
    """Persist one run and return the stored row."""
    if not command:
        raise InvalidInputError("command name is required")
    run = RunRecord(
        command=command,
        parameters=_dumps(parameters),
        outcome=outcome,
        summary=_dumps(summary or {}),
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info("recorded %s run #%s (%s)", command, run.id, outcome)
    return run


def list_runs(db: Session, command: Optional[str] = None, limit: Optional[int] = None) -> List[RunRecord]:
    """Recorded runs, newest first."""
    query = db.query(RunRecord)
    if command:
        query = query.filter(RunRecord.command == command)
    query = query.order_by(RunRecord.id.desc())
    if limit is not None:
        query = query.limit(limit)
    return query.all()


def to_dict(run: RunRecord) -> Dict[str, Any]:
    return {
        "id": run.id,
        "command": run.command,
        "parameters": json.loads(run.parameters),
        "outcome": run.outcome,
        "summary": json.loads(run.summary),
        "created_at": run.created_at.isoformat(),
    }
