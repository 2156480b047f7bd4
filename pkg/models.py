"""
Experiment reports and the optional run ledger
"""
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Optional

from sqlalchemy import create_engine, Column, Integer, String, DateTime, Text
from sqlalchemy.orm import declarative_base, sessionmaker

from config import REPORT_SCHEMA, VERSION

Base = declarative_base()


@dataclass
class ExperimentReport:
    """Machine-readable result of one experiment"""
    spec: Dict[str, Any]
    samples: int
    estimate: float
    confidence_radius: float
    command: str = ''
    seed: Optional[int] = None
    config: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    version: str = VERSION
    schema: int = REPORT_SCHEMA
    wall_time_ms: Optional[float] = None

    def to_dict(self):
        data = asdict(self)
        if self.wall_time_ms is None:
            data.pop('wall_time_ms')
        return data


class ExperimentRun(Base):
    """One invocation of the experiment driver"""
    __tablename__ = 'experiment_runs'

    id = Column(Integer, primary_key=True)
    command = Column(String(50), nullable=False)  # verify, mp-test, distinguish, far-fraction, purity
    seed = Column(Integer)
    exit_code = Column(Integer, nullable=False)
    version = Column(String(100))
    schema = Column(Integer, default=REPORT_SCHEMA)
    config_json = Column(Text)  # JSON string
    report_json = Column(Text)  # JSON string
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)

    def to_dict(self):
        return {
            'id': self.id,
            'command': self.command,
            'seed': self.seed,
            'exit_code': self.exit_code,
            'version': self.version,
            'schema': self.schema,
            'config': json.loads(self.config_json) if self.config_json else None,
            'report': json.loads(self.report_json) if self.report_json else None,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }


# Database setup; engines are created on first use so that importing stays free
_sessions = {}


def init_db(url):
    """Create the ledger tables and return a session factory bound to `url`"""
    if url not in _sessions:
        engine = create_engine(url, echo=False)
        Base.metadata.create_all(bind=engine)
        _sessions[url] = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    return _sessions[url]


def get_session(url):
    return init_db(url)()


def record_run(url, command, seed, exit_code, config, report):
    """Append one run to the ledger and return its id"""
    db = get_session(url)
    try:
        run = ExperimentRun(
            command=command,
            seed=seed,
            exit_code=exit_code,
            version=VERSION,
            schema=REPORT_SCHEMA,
            config_json=json.dumps(config, sort_keys=True, default=str),
            report_json=json.dumps(report, sort_keys=True, default=str),
        )
        db.add(run)
        db.commit()
        return run.id
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
