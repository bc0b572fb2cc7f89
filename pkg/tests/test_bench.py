import math

import numpy as np
import pytest

from osde_qmci.bench import (
    CLASSICAL,
    LOW_DEPTH,
    PROPOSED,
    BenchConfig,
    ExperimentRecord,
    cell_seed,
    classical_reference,
    loglog_fit,
    plot_tables,
    records_from_csv,
    records_to_csv,
    reference_values,
    run_sweep,
    sample_classical_mc,
    summarize,
    summary_to_csv,
    power_law_line,
)
from osde_qmci.errors import DomainError
from osde_qmci.pipeline import demo_times
from osde_qmci.qae import choose_beta, lqae_schedule
from osde_qmci.rbm import RbmKernel

from conftest import Q_REF_DEMO


def test_classical_reference_examples():
    assert classical_reference(0.5, 1, 0.5) == 1
    assert classical_reference(0.5, 8, 0.0004) == 12_500_000
    base = classical_reference(0.3, 1, 0.001)
    assert [classical_reference(0.3, N, 0.001) for N in (2, 7, 64)] == [2 * base, 7 * base, 64 * base]
    with pytest.raises(DomainError):
        classical_reference(1.0, 8, 0.1)


def _synthetic(values, depth):
    return [
        ExperimentRecord(PROPOSED, N, r, 0, 0.5, 0.001, int(round(q)), int(round(q)), depth)
        for N, q in values for r in range(3)
    ]


def test_summarize_exact_power_law():
    Ns = [8, 16, 32, 64, 128]
    recs = _synthetic([(N, 1000 * N**1.5) for N in Ns], 7)
    s = summarize(recs)
    assert s.slopes[PROPOSED]["queries"].slope == pytest.approx(1.5, abs=1e-5)
    assert s.slopes[PROPOSED]["depth"].slope == pytest.approx(0.0, abs=1e-12)
    fit = loglog_fit(Ns, [3.0 * N**1.5 for N in Ns])
    assert fit.slope == pytest.approx(1.5, abs=1e-9)
    assert s.cell(PROPOSED, 8).rmse == pytest.approx(0.001)


def test_summarize_needs_two_sizes():
    with pytest.raises(DomainError):
        summarize(_synthetic([(8, 100)], 1))


def test_rmse_is_root_mean_square():
    recs = [ExperimentRecord(PROPOSED, N, r, 0, 0.0, e, 1, 1, 1) for N in (2, 4) for r, e in enumerate((0.3, 0.4))]
    assert summarize(recs).cell(PROPOSED, 2).rmse == pytest.approx(math.sqrt((0.09 + 0.16) / 2))


def test_cell_seeds_distinct():
    seeds = {cell_seed(0, m, N, r) for m in (PROPOSED, LOW_DEPTH) for N in (8, 16) for r in range(5)}
    assert len(seeds) == 20


def test_sweep_deterministic_and_csv_round_trip():
    cfg = BenchConfig()
    a = run_sweep([2, 3], 2, master_seed=3, config=cfg)
    b = run_sweep([2, 3], 2, master_seed=3, config=cfg)
    assert records_to_csv(a) == records_to_csv(b)
    non_nan = [r for r in a if r.method != CLASSICAL]
    assert records_from_csv(records_to_csv(non_nan)) == non_nan
    back = records_from_csv(records_to_csv(a))
    assert records_to_csv(back) == records_to_csv(a)
    assert sum(r.method == CLASSICAL for r in a) == 2
    for r in a:
        if r.method != CLASSICAL:
            assert r.abs_err >= 0 and r.queries_up_units > 0 and r.max_depth > 0


def test_exact_backend_cell_error_is_truncation_only():
    cfg = BenchConfig(proposed_backend="exact")
    (rec,) = run_sweep([8], 1, [PROPOSED], config=cfg)
    assert rec.queries_up_units == 0
    print(f"exact-backend |q_hat - q_8| = {rec.abs_err:.3e}")
    assert rec.abs_err < 2e-4


def test_lowdepth_accounting_at_64():
    refs = {64: Q_REF_DEMO}
    cfg = BenchConfig()
    (rec,) = run_sweep([64], 1, [LOW_DEPTH], config=cfg, references=refs)
    beta = choose_beta(64, 0.0029)
    K = len(lqae_schedule(0.0029, beta))
    raw_depth = 2 * math.floor(K ** ((1 - beta) / (2 * beta)) + 1e-9) + 1
    assert rec.max_depth_raw == raw_depth == 87
    assert rec.max_depth == 64 * raw_depth
    assert rec.queries_up_single == 64 * rec.queries_raw
    assert rec.queries_up_all == rec.queries_up_units == 64 * 64 * rec.queries_raw
    (single,) = run_sweep([64], 1, [LOW_DEPTH], config=BenchConfig(lowdepth_mode="single"), references=refs)
    assert single.queries_up_units == single.queries_up_single


def test_reference_frozen_and_shared():
    refs = reference_values(BenchConfig(), [8, 16])
    assert refs[8] == pytest.approx(Q_REF_DEMO, abs=1e-9)
    assert refs[8] == refs[16]


def test_failed_cell_is_recorded():
    cfg = BenchConfig(lqae_eps=0.5)  # too coarse for N = 64, choose_beta refuses
    recs = run_sweep([64, 2], 1, [LOW_DEPTH], config=cfg, references={64: 0.6, 2: 0.6})
    assert recs[0].error.startswith("DomainError") and not recs[1].error


def test_sample_classical_mc_against_reference():
    n = 10**5
    q, trials = sample_classical_mc(RbmKernel(), 8, demo_times(8), 0.0, n, np.random.default_rng(1))
    assert trials == 8 * n
    assert abs(q - Q_REF_DEMO) <= 3 * math.sqrt(Q_REF_DEMO * (1 - Q_REF_DEMO) / n)
    q0, _ = sample_classical_mc(RbmKernel(mu=0.0), 4, demo_times(4), 0.0, n, np.random.default_rng(2))
    assert abs(q0 - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_output_tables():
    recs = _synthetic([(8, 100), (16, 300)], 4)
    s = summarize(recs)
    text = summary_to_csv(s)
    assert text.splitlines()[0] == "method,N,runs,rmse,mean_queries,mean_depth"
    tables = plot_tables(s)
    assert set(tables) == {"rmse", "queries", "depth"}
    assert tables["queries"].splitlines()[1] == "8,100.0"
    assert power_law_line("Proposed", [4, 16], 4, 8.0) == pytest.approx([8.0, 64.0])
