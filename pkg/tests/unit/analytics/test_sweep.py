"""
Unit tests for experiment grids.
"""
import csv

import numpy as np
import pytest

from ddelasticity.analytics import sweep as sweep_module
from ddelasticity.analytics.sweep import SWEEP_COLUMNS, cell_config, run_sweep, write_sweep
from ddelasticity.config.loader import InterfacePreconditioner, RunMode, build_run_config
from ddelasticity.core.problem import build_problem

pytestmark = pytest.mark.unit


def _sweep_config(**sweep):
    return build_run_config({
        "solver": {"krylov": {"tolerance": 1e-8}},
        "oc": {"max_iterations": 2},
        "sweep": sweep,
    })


class TestCellConfig:

    def test_narrows_to_one_cell(self):
        cfg = build_run_config({"problem": {"px": 4, "py": 1}, "sweep": {"task": "topopt"}})
        cell = cell_config(cfg, 0.125, 16, 0.7, InterfacePreconditioner.HNORM)

        assert cell.mode is RunMode.TOPOPT
        assert cell.problem.h == 0.125
        assert cell.problem.domains == 16
        assert cell.problem.px is None
        assert cell.problem.grid() == (4, 4)
        assert cell.solver.interface.theta == 0.7
        assert cfg.solver.interface.theta == 0.5

    def test_theta_kept_when_not_given(self):
        cfg = build_run_config({"solver": {"interface": {"theta": 0.6}}})
        cell = cell_config(cfg, 0.25, 4, None, InterfacePreconditioner.IDENTITY)

        assert cell.solver.precond is InterfacePreconditioner.IDENTITY
        assert cell.solver.interface.theta == 0.6


class TestRunSweep:

    def test_solve_cells(self):
        cfg = _sweep_config(h=[0.25], domains=[4], preconds=["identity", "hnorm"])
        rows = run_sweep(cfg)

        assert [r["precond"] for r in rows] == ["identity", "hnorm"]
        assert all(r["status"] == "ok" for r in rows)
        assert rows[0]["theta"] == ""
        assert rows[1]["theta"] == 0.5
        assert "estimated_seconds" not in rows[0]
        assert rows[1]["estimated_seconds"] >= 0.0
        assert rows[1]["pcg_per_application"] > 0.0

    def test_failed_cell_is_recorded(self):
        cfg = _sweep_config(h=[0.3, 0.25], domains=[4], preconds=["exact-schur"])
        rows = run_sweep(cfg)

        assert len(rows) == 2
        assert rows[0]["status"] == "failed"
        assert "0.3" in rows[0]["error"]
        assert rows[1]["status"] == "ok"

    @pytest.mark.parametrize("error", [np.linalg.LinAlgError("singular block"), ValueError("bad input")])
    def test_numerical_failure_is_recorded(self, monkeypatch, error):
        calls = []

        def failing_first(*args, **kwargs):
            calls.append(args)
            if len(calls) == 1:
                raise error
            return build_problem(*args, **kwargs)

        monkeypatch.setattr(sweep_module, "build_problem", failing_first)
        cfg = _sweep_config(h=["1/8"], domains=[2, 4], preconds=["exact-schur"])
        rows = run_sweep(cfg)

        assert len(rows) == 2
        assert rows[0]["status"] == "failed"
        assert str(error) in rows[0]["error"]
        assert rows[1]["status"] == "ok"

    def test_topopt_cells(self):
        cfg = _sweep_config(task="topopt", h=[0.25], domains=[4], thetas=[0.6], preconds=["hnorm"])
        rows = run_sweep(cfg)

        assert len(rows) == 1
        row = rows[0]
        assert row["theta"] == 0.6
        assert row["fixed_point_iters"] == 2
        assert row["table_cell"].startswith("2 (")
        assert row["status"] in ("ok", "not-converged")

    def test_write(self, tmp_path):
        cfg = _sweep_config(h=[0.25], domains=[1, 4], preconds=["identity"])
        path = write_sweep(tmp_path / "sweep.csv", run_sweep(cfg))

        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            rows = list(reader)
        assert tuple(reader.fieldnames) == SWEEP_COLUMNS
        assert [int(r["N"]) for r in rows] == [1, 4]
