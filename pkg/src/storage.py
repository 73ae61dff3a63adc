"""SQLite storage for cached eliminations and the run log."""
import hashlib
import json
import sqlite3
import threading
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence
from pathlib import Path
import logging

from .config import CACHE_DB_PATH
from .polycore import MonomialOrder, MultiPoly, ParseError, VarSet, format_poly, parse_poly

logger = logging.getLogger(__name__)

SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS eliminations (
    key TEXT PRIMARY KEY,
    varset TEXT NOT NULL,
    dropped TEXT NOT NULL,
    generators TEXT NOT NULL,
    result TEXT NOT NULL,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);

CREATE TABLE IF NOT EXISTS run_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    command TEXT NOT NULL,
    details TEXT,
    timestamp TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);
"""


class CacheError(Exception):
    """Raised when a cache database operation fails."""
    pass


class Database:
    """SQLite database wrapper with connection management."""
    def __init__(self, db_path: str = CACHE_DB_PATH):
        self.db_path = db_path
        self._ensure_db_directory()
        self.connection: Optional[sqlite3.Connection] = None
        self._lock = threading.Lock()

    def _ensure_db_directory(self) -> None:
        """Ensure the database directory exists."""
        if self.db_path == ":memory:":
            return
        db_dir = Path(self.db_path).parent
        db_dir.mkdir(parents=True, exist_ok=True)

    def connect(self) -> None:
        """Create a database connection."""
        try:
            self.connection = sqlite3.connect(self.db_path, check_same_thread=False)
            self.connection.row_factory = sqlite3.Row
            self._create_schema()
        except sqlite3.Error as e:
            logger.error(f"Failed to connect to cache database: {e}")
            raise CacheError(f"Cache connection failed: {e}")

    def disconnect(self) -> None:
        """Close the database connection."""
        if self.connection:
            self.connection.close()
            self.connection = None

    def _create_schema(self) -> None:
        """Create database schema if it doesn't exist."""
        if not self.connection:
            raise CacheError("No database connection")
        try:
            self.connection.executescript(SCHEMA_SQL)
            self.connection.commit()
        except sqlite3.Error as e:
            logger.error(f"Failed to create schema: {e}")
            raise CacheError(f"Schema creation failed: {e}")

    def _run(self, query: str, params: tuple, fetch: Callable[[sqlite3.Cursor], Any]) -> Any:
        """Execute a query and read its cursor while holding the connection lock."""
        if not self.connection:
            raise CacheError("No database connection")
        try:
            with self._lock:
                return fetch(self.connection.execute(query, params))
        except sqlite3.Error as e:
            logger.error(f"Query execution failed: {e}")
            raise CacheError(f"Query execution failed: {e}")

    def execute(self, query: str, params: tuple = ()) -> int:
        """Execute a SQL statement and return the number of rows it changed."""
        return self._run(query, params, lambda cursor: cursor.rowcount)

    def commit(self) -> None:
        """Commit the current transaction."""
        if not self.connection:
            raise CacheError("No database connection")
        try:
            with self._lock:
                self.connection.commit()
        except sqlite3.Error as e:
            logger.error(f"Failed to commit transaction: {e}")
            raise CacheError(f"Transaction commit failed: {e}")

    def fetch_one(self, query: str, params: tuple = ()) -> Optional[Dict[str, Any]]:
        """Execute a query and fetch one result row."""
        row = self._run(query, params, lambda cursor: cursor.fetchone())
        return dict(row) if row else None

    def fetch_all(self, query: str, params: tuple = ()) -> List[Dict[str, Any]]:
        """Execute a query and fetch all result rows."""
        return [dict(row) for row in self._run(query, params, lambda cursor: cursor.fetchall())]


class EliminationCache:
    """
    Stores elimination ideals in polynomial text format, keyed by their input.

    A disabled cache keeps its database for the run log but never reads or
    writes eliminations.
    """
    def __init__(self, db: Database, enabled: bool = True):
        self.db = db
        self.enabled = enabled

    @staticmethod
    def make_key(gens: Sequence[MultiPoly], drop: Iterable[str],
                 order: Optional[MonomialOrder] = None) -> str:
        payload = {
            "varset": list(gens[0].varset.names),
            "drop": sorted(drop),
            "generators": sorted(format_poly(g) for g in gens),
            "order": [order.kind, [list(b) for b in order.blocks]] if order else "block",
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def get(self, gens: Sequence[MultiPoly], drop: Iterable[str], kept: VarSet,
            order: Optional[MonomialOrder] = None) -> Optional[List[MultiPoly]]:
        """Return cached generators, or None on a miss or an unreadable entry."""
        if not self.enabled:
            return None
        key = self.make_key(gens, drop, order)
        try:
            row = self.db.fetch_one("SELECT result FROM eliminations WHERE key = ?", (key,))
        except CacheError as e:
            logger.error(f"Cache lookup failed: {e}")
            return None
        if not row:
            return None
        try:
            return [parse_poly(text, kept) for text in json.loads(row['result'])]
        except (ParseError, ValueError) as e:
            logger.warning(f"Discarding corrupt cache entry {key[:12]}: {e}")
            return None

    def put(self, gens: Sequence[MultiPoly], drop: Iterable[str], kept: VarSet,
            result: Sequence[MultiPoly], order: Optional[MonomialOrder] = None) -> None:
        if not self.enabled:
            return
        drop = list(drop)
        key = self.make_key(gens, drop, order)
        try:
            self.db.execute(
                """
                INSERT OR REPLACE INTO eliminations (key, varset, dropped, generators, result)
                VALUES (?, ?, ?, ?, ?)
                """,
                (key, json.dumps(list(kept.names)), json.dumps(sorted(drop)),
                 json.dumps([format_poly(g) for g in gens]),
                 json.dumps([format_poly(r) for r in result])))
            self.db.commit()
        except CacheError as e:
            logger.error(f"Failed to store elimination {key[:12]}: {e}")

    def count(self) -> int:
        row = self.db.fetch_one("SELECT COUNT(*) AS n FROM eliminations")
        return row['n'] if row else 0


def open_cache(db_path: Optional[str] = None, enabled: bool = True) -> Optional[EliminationCache]:
    """Open the cache database, or None when it is unavailable; `enabled` switches elimination caching."""
    try:
        db = Database(db_path or CACHE_DB_PATH)
        db.connect()
    except (CacheError, OSError) as e:
        logger.warning(f"Running without cache database: {e}")
        return None
    return EliminationCache(db, enabled)
