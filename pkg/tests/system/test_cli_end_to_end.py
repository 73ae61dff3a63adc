"""System tests for CLI functionality."""
import csv
import json
import os
import sqlite3
import sys
import tempfile
import pytest
import subprocess
from pathlib import Path


# Helper functions for system tests
def run_cli_command(args: list, cwd: str = None) -> tuple[int, str, str]:
    """
    Run the singtraj CLI and return exit code, stdout, and stderr.

    Args:
        args: Arguments after the module name
        cwd: Working directory for the process

    Returns:
        tuple: (return_code, stdout, stderr)
    """
    root = Path(__file__).resolve().parents[2]
    env = dict(os.environ)
    env['PYTHONPATH'] = str(root) + os.pathsep + env.get('PYTHONPATH', '')
    process = subprocess.Popen(
        [sys.executable, "-m", "src.cli", *args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        cwd=cwd or str(root),
        env=env,
    )
    stdout, stderr = process.communicate()
    return process.returncode, stdout, stderr


UNREACHABLE = {
    "name": "sunken",
    "domain": {"lo": "-1", "hi": "1", "unit": "pi"},
    "coords": {
        "x": {"harmonics": [{"k": 1, "sin": "1/2"}]},
        "y": {"harmonics": [{"k": 1, "cos": "1/2"}]},
        "z": {"constant": "-3"},
    },
}


class TestCLISystem:
    """System tests for CLI functionality."""

    @pytest.fixture(scope="class")
    def temp_db_path(self):
        """Create a temporary cache database shared by the class."""
        fd, path = tempfile.mkstemp(suffix='.db')
        os.close(fd)
        yield path
        if os.path.exists(path):
            os.unlink(path)

    @pytest.fixture
    def env_vars(self, temp_db_path, tmp_path):
        """Set up environment variables for testing."""
        old_vars = {}
        new_vars = {
            'SINGTRAJ_CACHE_DB': temp_db_path,
            'SINGTRAJ_LOG_FILE': str(tmp_path / 'singtraj.log'),
            'SINGTRAJ_LOG_LEVEL': 'INFO',
        }

        # Save old vars and set new ones
        for key, value in new_vars.items():
            old_vars[key] = os.environ.get(key)
            os.environ[key] = value

        yield dict(new_vars, OUT=str(tmp_path / 'out'))

        # Restore old vars
        for key, value in old_vars.items():
            if value is None:
                del os.environ[key]
            else:
                os.environ[key] = value

    def test_SGT_F_023_workspace_probe(self, env_vars):
        """Test the workspace probe writes counts per grid point (SGT-F-023)."""
        returncode, stdout, stderr = run_cli_command(
            ["workspace-probe", "--grid", "0:0:1", "--out", env_vars['OUT']])

        assert returncode == 0, stderr
        assert "1 points written" in stdout
        with open(Path(env_vars['OUT']) / "probe_workspace.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows == [['x', 'y', 'z', 'total', 'feasible'], ['0', '0', '0', '8', '1']]

    def test_SGT_F_023_joint_space_probe(self, env_vars):
        """Test the joint-space probe counts direct kinematic solutions (SGT-F-023)."""
        returncode, stdout, stderr = run_cli_command(
            ["workspace-probe", "--space", "joint", "--grid", "2:2:1", "--out", env_vars['OUT']])

        assert returncode == 0, stderr
        with open(Path(env_vars['OUT']) / "probe_joint.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[1] == ['2', '2', '2', '2']

    def test_SGT_NF_003_invalid_arguments(self, env_vars):
        """Test usage errors exit with code 1 and a diagnostic (SGT-NF-003)."""
        cases = [
            (["verify", "--trajectory", "no_such_file.json"], "Trajectory file not found"),
            (["verify", "--trajectory", "heart1", "--mode", "+,x,+"], "Invalid working mode"),
            (["workspace-probe", "--grid", "2:1:3"], "lo <= hi"),
            (["workspace-probe", "--decimals", "0"], "--decimals"),
            (["verify"], "--trajectory"),
            (["no-such-command"], "invalid choice"),
        ]
        for args, message in cases:
            returncode, stdout, stderr = run_cli_command(args, cwd=str(Path(env_vars["OUT"]).parent))
            assert returncode == 1, args
            assert message in stderr, args

    def test_SGT_NF_003_malformed_model_file(self, env_vars, tmp_path):
        """Test malformed model files are reported with their position (SGT-NF-003)."""
        model = tmp_path / "broken_model.json"
        model.write_text('{"name": "broken",\n "pose_vars": [}')
        returncode, stdout, stderr = run_cli_command(
            ["workspace-probe", "--model", str(model), "--out", env_vars['OUT']])

        assert returncode == 1
        assert "line 2" in stderr

    def test_SGT_NF_003_blowup_ceiling(self, env_vars):
        """Test a resource ceiling stops elimination with exit code 1 (SGT-NF-003)."""
        returncode, stdout, stderr = run_cli_command(
            ["model-info", "--no-cache", "--max-basis", "1", "--out", env_vars['OUT']])

        assert returncode == 1
        assert "ceiling 1" in stderr

    def test_SGT_F_022_project_heart2(self, env_vars):
        """Test projection of heart2 into the joint space (SGT-F-022)."""
        returncode, stdout, stderr = run_cli_command(
            ["project", "--trajectory", "heart2", "--samples", "16", "--out", env_vars['OUT']])

        assert returncode == 0, stderr
        out = Path(env_vars['OUT'])
        assert len((out / "heart2_upsilon.txt").read_text().splitlines()) == 4
        assert len(list(out.glob("heart2_mode_*.csv"))) == 8
        assert "rho2 = " in stdout
        assert "1 of 8 modes feasible" in stdout

    def test_SGT_NF_004_run_log(self, env_vars):
        """Test every run is recorded in the cache database, with or without caching (SGT-NF-004)."""
        run_cli_command(["workspace-probe", "--grid", "0:0:1", "--out", env_vars['OUT']])
        run_cli_command(["workspace-probe", "--grid", "0:0:1", "--no-cache", "--out", env_vars['OUT']])

        conn = sqlite3.connect(env_vars['SINGTRAJ_CACHE_DB'])
        try:
            rows = conn.execute(
                "SELECT command, details FROM run_log ORDER BY id DESC LIMIT 2").fetchall()
        finally:
            conn.close()
        assert [r[0] for r in rows] == ["workspace-probe", "workspace-probe"]
        assert all(json.loads(r[1])["exit_code"] == 0 for r in rows)
        assert "Run logged" in Path(env_vars['SINGTRAJ_LOG_FILE']).read_text()

    @pytest.mark.slow
    def test_SGT_F_022_model_info(self, env_vars):
        """Test model-info prints the singularity loci and writes xi (SGT-F-022)."""
        returncode, stdout, stderr = run_cli_command(["model-info", "--out", env_vars['OUT']])

        assert returncode == 0, stderr
        assert "det(A) = " in stdout
        assert "deg(xi) = 18" in stdout
        assert "mu(rho1 = 0) = x^2 + y^2 + z^2 - 4" in stdout
        assert (Path(env_vars['OUT']) / "orthoglide_xi.txt").exists()

    @pytest.mark.slow
    def test_SGT_F_022_verify_singular_heart1(self, env_vars):
        """Test heart1 is reported singular with exit code 2 (SGT-F-022)."""
        returncode, stdout, stderr = run_cli_command(
            ["verify", "--trajectory", "heart1", "--samples", "64", "--out", env_vars['OUT']])

        assert returncode == 2, stderr
        assert "singular (2 real of 4 candidate events)" in stdout
        assert "real-singularity" in stdout and "spurious-projection" in stdout
        out = Path(env_vars['OUT'])
        report = json.loads((out / "heart1_report.json").read_text())
        assert report["verdict"] == "singular"
        assert report["timing"] is None
        with open(out / "heart1_curve.csv") as fh:
            rows = list(csv.reader(fh))
        assert sum(1 for r in rows[1:] if r[3]) == 4

    @pytest.mark.slow
    def test_SGT_F_022_verify_free_heart2(self, env_vars):
        """Test heart2 is certified singularity-free with exit code 0 (SGT-F-022)."""
        returncode, stdout, stderr = run_cli_command(
            ["verify", "--trajectory", "heart2", "--timing", "--out", env_vars['OUT']])

        assert returncode == 0, stderr
        assert "singularity-free" in stdout
        report = json.loads((Path(env_vars['OUT']) / "heart2_report.json").read_text())
        assert report["timing"]["elapsed_seconds"] >= 0

    @pytest.mark.slow
    def test_SGT_F_022_verify_infeasible(self, env_vars, tmp_path):
        """Test a trajectory no working mode can follow exits with code 3 (SGT-F-022)."""
        path = tmp_path / "sunken.json"
        path.write_text(json.dumps(UNREACHABLE))
        returncode, stdout, stderr = run_cli_command(
            ["verify", "--trajectory", str(path), "--samples", "16", "--out", env_vars['OUT']])

        assert returncode == 3, stderr
        assert "on mode none: infeasible" in stdout
        assert (Path(env_vars['OUT']) / "sunken_report.json").exists()
