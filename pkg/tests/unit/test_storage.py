"""Unit tests for the elimination cache and the run log."""
import logging
from concurrent.futures import ThreadPoolExecutor
import pytest

from src.groebner import eliminate
from src.logger import RunLogger, setup_logging
from src.polycore import VarSet, parse_poly
from src.storage import CacheError, Database, EliminationCache, open_cache


@pytest.fixture
def db():
    """Create an in-memory database with the schema."""
    database = Database(":memory:")
    database.connect()
    yield database
    database.disconnect()


@pytest.fixture
def cache(db):
    return EliminationCache(db)


@pytest.fixture
def gens():
    xyz = VarSet(('x', 'y', 'z'))
    return [parse_poly("x - y^2", xyz), parse_poly("z - y^3", xyz)]


def test_SGT_F_021_cache_round_trip(cache, gens):
    """Test eliminations are stored and served back exactly (SGT-F-021)."""
    kept = VarSet(('x', 'z'))
    assert cache.get(gens, ['y'], kept) is None
    result = eliminate(gens, ['y'], cache=cache)
    assert cache.count() == 1
    assert eliminate(gens, ['y'], cache=cache) == result
    assert cache.count() == 1


def test_SGT_F_021_cache_key_is_order_independent(gens):
    """Test the cache key ignores generator and drop-list order (SGT-F-021)."""
    key = EliminationCache.make_key(gens, ['y'])
    assert key == EliminationCache.make_key(list(reversed(gens)), ['y'])
    assert key != EliminationCache.make_key(gens, ['x'])
    assert len(key) == 64


def test_SGT_F_021_corrupt_entry_is_recomputed(db, cache, gens):
    """Test an unreadable cache row is treated as a miss (SGT-F-021)."""
    result = eliminate(gens, ['y'], cache=cache)
    db.execute("UPDATE eliminations SET result = ?", ('["x^3 - q"]',))
    db.commit()
    assert eliminate(gens, ["y"], cache=cache) == result
    row = db.fetch_one("SELECT result FROM eliminations")
    assert "q" not in row['result']


def test_SGT_F_021_open_cache(tmp_path, gens):
    """Test opening, disabling and failing to open the cache (SGT-F-021)."""
    path = tmp_path / "nested" / "cache.db"
    cache = open_cache(str(path))
    assert cache is not None and cache.enabled and path.exists()
    cache.db.disconnect()
    disabled = open_cache(str(path), enabled=False)
    assert disabled is not None and not disabled.enabled
    eliminate(gens, ['y'], cache=disabled)
    assert disabled.count() == 0
    assert disabled.get(gens, ['y'], VarSet(('x', 'z'))) is None
    disabled.db.disconnect()
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert open_cache(str(blocker / "cache.db")) is None


def test_SGT_F_021_database_errors(db):
    """Test database failures surface as CacheError (SGT-F-021)."""
    with pytest.raises(CacheError):
        db.execute("SELECT * FROM missing_table")
    closed = Database(":memory:")
    with pytest.raises(CacheError, match="No database connection"):
        closed.fetch_all("SELECT 1")
    assert db.fetch_one("SELECT 1 AS one") == {"one": 1}
    assert db.execute("INSERT INTO run_log (command) VALUES (?)", ("verify",)) == 1


def test_SGT_F_021_shared_connection_across_threads(db, cache, gens):
    """Test concurrent writers and readers on one connection see whole rows (SGT-F-021)."""
    log = RunLogger(db)

    def work(i):
        log.log_run("verify", {"run": i})
        rows = db.fetch_all("SELECT command, details FROM run_log")
        assert all(r["command"] == "verify" for r in rows)
        return cache.count()

    with ThreadPoolExecutor(max_workers=8) as pool:
        counts = list(pool.map(work, range(64)))
    assert counts == [0] * 64
    assert db.fetch_one("SELECT COUNT(*) AS n FROM run_log")["n"] == 64


def test_SGT_NF_004_run_log(db):
    """Test CLI runs are recorded in order with their details (SGT-NF-004)."""
    log = RunLogger(db)
    log.log_run("model-info", {"model": "orthoglide"})
    log.log_run("verify", {"trajectory": "heart1", "verdict": "singular"})
    runs = db.fetch_all("SELECT command, details FROM run_log ORDER BY id DESC")
    assert [r["command"] for r in runs] == ["verify", "model-info"]
    assert '"verdict": "singular"' in runs[0]["details"]
    RunLogger(None).log_run("verify")


def test_SGT_NF_004_run_log_survives_closed_database(caplog):
    """Test a failing run log write is reported but not raised (SGT-NF-004)."""
    closed = Database(":memory:")
    with caplog.at_level(logging.ERROR):
        RunLogger(closed).log_run("verify")
    assert "Failed to log run" in caplog.text


def test_SGT_NF_004_setup_logging(tmp_path):
    """Test the log file receives records at the configured level (SGT-NF-004)."""
    log_file = tmp_path / "singtraj.log"
    root = logging.getLogger()
    saved = (root.handlers[:], root.level)
    try:
        setup_logging(str(log_file), "%(levelname)s %(name)s %(message)s", "debug")
        logging.getLogger("src.test").debug("probe message")
        for handler in root.handlers:
            handler.flush()
        assert "DEBUG src.test probe message" in log_file.read_text()
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers[:] = saved[0]
        root.setLevel(saved[1])
