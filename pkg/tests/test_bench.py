import math

import numpy as np
import pandas as pd
import pytest

from frbsplit import bench
from frbsplit.bench import (
    BENCHMARK_SIZES,
    REPORT_COLUMNS,
    BenchReport,
    BenchRow,
    FeasibilityInstance,
    TrialResult,
    aggregate,
    generate_instance,
    load_instance,
    read_report,
    run_suite,
    run_trial,
    save_instance,
    sparsity_budget,
    write_report,
)
from frbsplit.config import SolverConfig
from frbsplit.exceptions import ConfigurationError, ReportError, SolverError, ValidationError
from frbsplit.merit import check_descent, check_residual_bound
from frbsplit.solvers import SolverKind, frb_solve


def exhaustive_one_sparse_minimum(instance):
    """Global minimum of ½dist²(x, C) over x = t·e_i, |t| ≤ l, for every index i."""
    affine = instance.affine_set()
    v = affine.apply_pinv(instance.b)
    minima = []
    for i in range(instance.n):
        u = affine.apply_pinv(instance.A[:, i])
        t = np.clip(u @ v / (u @ u), -instance.l, instance.l)
        d = t * u - v
        minima.append(0.5 * float(d @ d))
    return np.array(minima)


class TestGenerateInstance:
    def test_shapes_and_planted_solution(self):
        instance = generate_instance(300, 600, seed=5)
        assert instance.A.shape == (300, 600)
        assert instance.r == sparsity_budget(300) == 60
        assert np.count_nonzero(instance.planted) == 60
        assert np.max(np.abs(instance.planted)) <= 1e6
        assert np.linalg.norm(instance.A @ instance.planted - instance.b) <= 1e-9 * (
            1 + np.linalg.norm(instance.b)
        )

    def test_budget_rounds_up(self):
        assert [sparsity_budget(m) for m in (4, 5, 6, 301)] == [1, 1, 2, 61]

    def test_deterministic_per_seed(self):
        first, second = generate_instance(5, 9, seed=42), generate_instance(5, 9, seed=42)
        np.testing.assert_array_equal(first.A, second.A)
        np.testing.assert_array_equal(first.b, second.b)
        np.testing.assert_array_equal(first.planted, second.planted)
        assert not np.array_equal(first.A, generate_instance(5, 9, seed=43).A)

    def test_residual_identity(self):
        instance = generate_instance(5, 9, seed=0)
        np.testing.assert_allclose(instance.A @ instance.planted, instance.b, atol=1e-12)
        assert instance.sparse_box().contains(instance.planted)

    @pytest.mark.parametrize("m, n", [(6, 6), (7, 5)])
    def test_rejects_wide_or_square(self, m, n):
        with pytest.raises(ValidationError):
            generate_instance(m, n, seed=0)

    def test_negative_seed_maps_onto_uint64(self):
        negative, unsigned = generate_instance(5, 9, seed=-1), generate_instance(5, 9, seed=2**64 - 1)
        np.testing.assert_array_equal(negative.A, unsigned.A)
        np.testing.assert_array_equal(negative.planted, unsigned.planted)
        assert negative.seed == -1

    @pytest.mark.parametrize("seed", [2**64, -(2**63) - 1, 1.5, True])
    def test_rejects_seed_outside_64_bits(self, seed):
        with pytest.raises(ValidationError) as exc:
            generate_instance(5, 9, seed=seed)
        assert exc.value.params == {"seed": seed}

    def test_rejects_inconsistent_planted(self):
        with pytest.raises(ValidationError):
            FeasibilityInstance(
                A=np.eye(2, 3), b=np.ones(2), r=1, l=1e6, planted=np.zeros(3)
            )


@pytest.fixture
def origin_instance():
    A = np.random.default_rng(0).standard_normal((3, 7))
    return FeasibilityInstance(A=A, b=np.zeros(3), r=1, l=1e6, planted=np.zeros(7))


class TestRunTrial:
    @pytest.mark.parametrize("solver", ["frb", "dr", "itseng"])
    def test_origin_is_optimal(self, origin_instance, solver):
        result = run_trial(origin_instance, solver)
        assert result.terminal_objective == 0.0
        assert result.success
        assert result.iterations <= 2
        assert result.solver is SolverKind.from_name(solver)

    def test_tiny_instance_against_exhaustive_search(self, tiny_instance):
        minima = exhaustive_one_sparse_minimum(tiny_instance)
        assert minima.min() < 1e-20

        report = frb_solve(tiny_instance.problem(), np.zeros(8), SolverConfig.frb_default())
        assert report.terminal_objective >= minima.min() - 1e-15
        support = np.flatnonzero(report.final_x)
        assert len(support) <= 1
        if len(support) == 1:
            # a stationary point is optimal on its own support
            assert report.terminal_objective == pytest.approx(minima[support[0]], abs=1e-8)

    def test_failures_carry_the_seed(self, small_instance, monkeypatch):
        def broken(*args, **kwargs):
            raise FloatingPointError("overflow")

        monkeypatch.setattr(bench, "solve", broken)
        with pytest.raises(SolverError) as exc:
            run_trial(small_instance, "frb")
        assert exc.value.seed == 3
        assert (exc.value.m, exc.value.n, exc.value.solver) == (20, 40, "frb")
        assert isinstance(exc.value.__cause__, FloatingPointError)

    def test_configuration_errors_pass_through(self, small_instance):
        with pytest.raises(ConfigurationError):
            run_trial(small_instance, "frb", SolverConfig.frb_default(step_size=0.3))

    def test_success_threshold(self):
        assert TrialResult(SolverKind.FRB, 10, 9.99e-13, 0.0).success
        assert not TrialResult(SolverKind.FRB, 10, 1e-12, 0.0).success


def test_benchmark_presets():
    assert not any(bench.default_config(s).record_trace for s in ("frb", "dr", "itseng"))
    dr = bench.default_config("dr")
    assert dr.dr_gamma == pytest.approx(0.2090, abs=1e-4)
    assert dr.dr_gamma < math.sqrt(1.5) - 1
    assert bench.default_config("frb").step_size == SolverConfig.frb_default().step_size


class TestRunSuite:
    def test_single_trial_mean_is_that_trial(self):
        report = run_suite([(10, 20)], trials=1, solvers=["frb"], base_seed=4)
        (row,) = report.rows
        (result,) = report.results
        assert row.mean_iter_ceiling == result.iterations
        assert row.fval_min == result.terminal_objective
        assert (row.m, row.n, row.solver, row.trials) == (10, 20, "FRB", 1)
        assert result.seed == 4

    def test_rows_ordered_by_size_then_solver(self):
        report = run_suite([(10, 20), (8, 20)], trials=2)
        keys = [(r.m, r.n, r.solver) for r in report.rows]
        assert keys == [
            (10, 20, "FRB"), (10, 20, "DR"), (10, 20, "iTseng"),
            (8, 20, "FRB"), (8, 20, "DR"), (8, 20, "iTseng"),
        ]
        assert report.row(8, 20, "itseng").trials == 2

    def test_same_seed_same_report(self):
        first = run_suite([(10, 20)], trials=3, base_seed=7)
        second = run_suite([(10, 20)], trials=3, base_seed=7)
        assert first.rows == second.rows

    def test_process_pool_matches_inline(self):
        inline = run_suite([(10, 20)], trials=3, base_seed=2)
        pooled = run_suite([(10, 20)], trials=3, base_seed=2, workers=2)
        assert inline.rows == pooled.rows

    def test_aggregate_ignores_trial_order(self):
        results = run_suite([(10, 20)], trials=4, solvers=["dr"]).results
        assert aggregate(10, 20, SolverKind.DR, results) == aggregate(
            10, 20, SolverKind.DR, results[::-1]
        )

    def test_aggregate_takes_mean_ceiling(self):
        results = [
            TrialResult(SolverKind.FRB, iterations, objective, 0.0)
            for iterations, objective in ((10, 1e-3), (11, 1e-14))
        ]
        row = aggregate(300, 600, SolverKind.FRB, results)
        assert (row.mean_iter_ceiling, row.fval_min, row.success_count) == (11, 1e-14, 1)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValidationError):
            run_suite([(10, 20)], trials=0)

    def test_success_count_bounded(self):
        with pytest.raises(ValidationError):
            BenchRow(300, 600, "FRB", 400, 0.0, success_count=51, trials=50)


class TestReportCsv:
    def test_empty_report_is_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_report(BenchReport(), path)
        assert path.read_text().strip() == ",".join(REPORT_COLUMNS)

    def test_single_row(self, tmp_path):
        path = tmp_path / "one.csv"
        row = BenchRow(300, 600, "FRB", 411, 1.234567891e-20, 48, 50)
        write_report(BenchReport(rows=[row]), path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["m,n,solver,iter,fval_min,succ,trials", "300,600,FRB,411,1.234568e-20,48,50"]
        assert read_report(path).rows == [BenchRow(300, 600, "FRB", 411, 1.234568e-20, 48, 50)]

    def test_full_table_layout(self, tmp_path):
        rows = [
            BenchRow(m, n, kind.label, 100, 0.5, 10, 50)
            for m, n in BENCHMARK_SIZES
            for kind in bench.ALL_SOLVERS
        ]
        path = tmp_path / "grid.csv"
        write_report(BenchReport(rows=rows), path)
        frame = pd.read_csv(path)
        assert len(frame) == 45
        assert list(frame.columns) == REPORT_COLUMNS
        assert list(frame["solver"][:3]) == ["FRB", "DR", "iTseng"]

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(ReportError) as exc:
            write_report(BenchReport(), tmp_path / "missing" / "out.csv")
        assert "missing" in str(exc.value.path)

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(ReportError):
            read_report(tmp_path / "absent.csv")


def test_instance_recipe_round_trip(tmp_path):
    path = tmp_path / "instance.json"
    instance = generate_instance(6, 10, seed=99)
    save_instance(instance, path)
    loaded = load_instance(path)
    np.testing.assert_array_equal(loaded.A, instance.A)
    np.testing.assert_array_equal(loaded.planted, instance.planted)


def test_unseeded_instance_cannot_be_saved(tmp_path, origin_instance):
    with pytest.raises(ValidationError):
        save_instance(origin_instance, tmp_path / "instance.json")


@pytest.mark.slow
def test_hard_regime_bands():
    report = run_suite([(300, 600)], trials=50, base_seed=1000)
    frb, dr, itseng = (report.row(300, 600, s) for s in ("frb", "dr", "itseng"))
    assert 300 <= frb.mean_iter_ceiling <= 550
    assert frb.success_count >= 42
    assert 700 <= itseng.mean_iter_ceiling <= 1200
    assert itseng.success_count <= 25
    assert 350 <= dr.mean_iter_ceiling <= 650
    assert frb.mean_iter_ceiling < dr.mean_iter_ceiling < itseng.mean_iter_ceiling


@pytest.mark.slow
def test_easy_regime_band():
    row = run_suite([(500, 600)], trials=50, solvers=["frb"], base_seed=2000).rows[0]
    assert row.success_count >= 48
    assert 120 <= row.mean_iter_ceiling <= 220


@pytest.mark.slow
def test_certificates_on_compliant_runs():
    sizes = [(4, 8)] * 8 + [(20, 40)] * 6 + [(100, 200)] * 4 + [(300, 600)] * 2
    for seed, (m, n) in enumerate(sizes):
        instance = generate_instance(m, n, seed)
        trace = frb_solve(instance.problem(), np.zeros(n), SolverConfig.frb_default()).trace
        assert check_descent(trace) == []
        assert check_residual_bound(trace) == []
