from __future__ import annotations

import json
import math
import sys
import threading
from collections.abc import Callable
from contextvars import ContextVar
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pytest
from pytest_mock import MockerFixture

from diffuseperim import (
    ExperimentConfig,
    NoConvergence,
    WorkerPool,
    execute,
    run,
)
from diffuseperim._artifacts import PlotSpec, Table, jsonable, plot_script
from diffuseperim._experiments import (
    CHECK_FAILED,
    Check,
    Session,
    _invariants_potentials,
    _invariants_profile,
)

if sys.version_info < (3, 11):
    from exceptiongroup import ExceptionGroup

current_item: ContextVar[str] = ContextVar("current_item", default="unset")


class TestWorkerPool:
    @pytest.mark.parametrize("threads", [1, 4])
    def test_order_and_context(self, threads: int) -> None:
        current_item.set("sweep")
        seen: list[str] = []

        def work(value: int) -> int:
            seen.append(current_item.get())
            return value * value

        assert WorkerPool(threads).map(work, range(10)) == [v * v for v in range(10)]
        assert seen == ["sweep"] * 10

    def test_uses_threads(self) -> None:
        barrier = threading.Barrier(2, timeout=10)

        def work(_: int) -> int:
            barrier.wait()
            return threading.get_ident()

        idents = WorkerPool(2).map(work, range(2))
        assert idents[0] != idents[1]

    @pytest.mark.parametrize("threads", [1, 3])
    def test_failures_grouped(self, threads: int) -> None:
        finished: list[int] = []

        def work(value: int) -> int:
            if value % 2:
                raise NoConvergence(f"item {value}")

            finished.append(value)
            return value

        with pytest.raises(ExceptionGroup) as exc:
            WorkerPool(threads).map(work, range(5))

        assert str(exc.value).startswith("2 of 5 sweep items failed")
        assert sorted(str(e) for e in exc.value.exceptions) == ["item 1", "item 3"]
        assert sorted(finished) == [0, 2, 4]

    def test_invalid_threads(self) -> None:
        with pytest.raises(ValueError):
            WorkerPool(0)


class TestArtifacts:
    def test_table_format(self, tmp_path: Path) -> None:
        table = Table(("eps", "passed", "note"), description="demo")
        table.append(0.1, True, None)
        table.append(np.float64(1 / 3), np.bool_(False), "x")
        table.write(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text(encoding="utf-8").splitlines() == [
            "# columns: eps, passed, note (demo)",
            "0.1,true,",
            "0.3333333333333333,false,x",
        ]

    def test_row_length(self) -> None:
        with pytest.raises(ValueError):
            Table(("a", "b")).append(1)

    def test_jsonable(self, tmp_path: Path) -> None:
        class Pair(NamedTuple):
            left: float
            right: np.ndarray

        value = {
            "pair": Pair(math.inf, np.arange(3)),
            "scalar": np.float32(0.5),
            "path": tmp_path,
            1: (math.nan, True),
        }
        assert jsonable(value) == {
            "pair": {"left": None, "right": [0, 1, 2]},
            "scalar": 0.5,
            "path": str(tmp_path),
            "1": [None, True],
        }
        json.dumps(jsonable(value), allow_nan=False)

    @pytest.mark.parametrize("reference", [None, (1.0, -2.0, "fit")])
    def test_plot_script_compiles(
        self, reference: tuple[float, float, str] | None
    ) -> None:
        spec = PlotSpec(
            "results.csv", ("eps", "psi"), "eps", ("psi",), "psi", reference=reference
        )
        script = plot_script(spec)
        compile(script, "plot.py", "exec")
        assert "results.png" in script


class TestSession:
    def test_streams_are_independent(self) -> None:
        session = Session(ExperimentConfig("fuglede", seed=3))
        a = session.rng("fuglede").random(4)
        b = session.rng("stability").random(4)
        np.testing.assert_array_equal(a, session.rng("fuglede").random(4))
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, session.rng("fuglede", 1).random(4))

    def test_minimizers_cached(self, mocker: MockerFixture) -> None:
        session = Session(ExperimentConfig("minimize"))
        sentinel = mocker.Mock()
        minimize = mocker.patch(
            "diffuseperim._experiments.minimize", return_value=sentinel
        )
        for name in ("chain", "profile", "constants"):
            mocker.patch.object(Session, name, None)

        mocker.patch("diffuseperim._experiments.make_grid")
        assert session.minimizers([0.1, 0.05, 0.1]) == [sentinel] * 3
        assert session.minimizers([0.05]) == [sentinel]
        assert minimize.call_count == 2
        assert set(session.solved) == {0.1, 0.05}


class TestRun:
    def test_constants(self, tmp_path: Path) -> None:
        config = ExperimentConfig("constants", out=tmp_path / "run")
        assert run(config) == 0
        names = {path.name for path in (tmp_path / "run").iterdir()}
        assert names == {"results.csv", "profile.csv", "report.json", "plot.py"}
        report = json.loads((tmp_path / "run" / "report.json").read_text("utf-8"))
        assert report["config"]["kind"] == "constants"
        assert report["config"]["out"] == str(tmp_path / "run")
        assert report["closed_form_error"] <= 1e-8
        assert report["constants"]["w_integral"] == pytest.approx(1.0, abs=1e-8)
        header = (tmp_path / "run" / "results.csv").read_text("utf-8").splitlines()[0]
        assert header == "# columns: name, value (profile constants)"

    def test_deterministic(self, tmp_path: Path) -> None:
        config = ExperimentConfig("constants", out=tmp_path)
        run(config)
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        run(config)
        assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first

    def test_verify_all_failure(self, tmp_path: Path, mocker: MockerFixture) -> None:
        def passing(session: Session) -> list[Check]:
            return [Check(3, "fine", 0.0, 1.0, True)]

        def failing(session: Session) -> list[Check]:
            return [Check(4, "too large", 2.0, 1.0, False)]

        def raising(session: Session) -> list[Check]:
            raise NoConvergence("no convergence at ε = 0.05")

        mocker.patch("diffuseperim._experiments._INVARIANTS", ())
        mocker.patch(
            "diffuseperim._experiments._CHECKS",
            ((3, passing), (4, failing), (6, raising)),
        )
        config = ExperimentConfig("verify-all", out=tmp_path)
        assert run(config) == CHECK_FAILED
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert not report["passed"]
        assert len(report["failures"]) == 2
        assert "no convergence at ε = 0.05" in report["failures"][1]
        assert report["checks"][2]["value"] is None
        assert not (tmp_path / "expansion.csv").exists()

    def test_verify_all_runs_invariants(
        self, tmp_path: Path, mocker: MockerFixture
    ) -> None:
        calls: list[str] = []

        def invariants(session: Session) -> list[Check]:
            calls.append("invariants")
            return [Check(0, "potentials: broken", 1.0, 0.0, False)]

        def acceptance(session: Session) -> list[Check]:
            calls.append("acceptance")
            return [Check(3, "fine", 0.0, 1.0, True)]

        mocker.patch("diffuseperim._experiments._INVARIANTS", (invariants,))
        mocker.patch("diffuseperim._experiments._CHECKS", ((3, acceptance),))
        result = execute(ExperimentConfig("verify-all", out=tmp_path))
        assert calls == ["invariants", "acceptance"]
        assert result.failures == [
            "invariant: potentials: broken = 1.0 (threshold 0.0)"
        ]
        assert [row[0] for row in result.table.rows] == [0, 3]

    @pytest.mark.parametrize(
        "suite", [_invariants_potentials, _invariants_profile], ids=lambda s: s.__name__
    )
    def test_invariant_suite_passes(
        self, suite: Callable[[Session], list[Check]]
    ) -> None:
        checks = suite(Session(ExperimentConfig("verify-all")))
        assert checks
        assert all(check.criterion == 0 for check in checks)
        assert [check.name for check in checks if not check.passed] == []

    def test_verify_all_passing(self, tmp_path: Path, mocker: MockerFixture) -> None:
        mocker.patch("diffuseperim._experiments._INVARIANTS", ())
        mocker.patch(
            "diffuseperim._experiments._CHECKS",
            ((3, lambda session: [Check(3, "fine", 0.0, 1.0, True)]),),
        )
        result = execute(ExperimentConfig("verify-all", out=tmp_path))
        assert result.failures == []
        assert result.report["passed"]

    @pytest.mark.slow
    def test_fuglede_reproducible(self, tmp_path: Path) -> None:
        outputs = []
        for name in ("a", "b"):
            config = ExperimentConfig(
                "fuglede", eps=(0.1,), perturbations=5, seed=11, out=tmp_path / name
            )
            assert run(config) == 0
            outputs.append((tmp_path / name / "results.csv").read_bytes())

        assert outputs[0] == outputs[1]
        report = json.loads((tmp_path / "a" / "report.json").read_text("utf-8"))
        assert report["batches"][0]["summary"]["min_ratio"] > 0
