"""Acceptance criteria, one test each, run at their stated tolerances.

Every test records a one-line verdict; ``conftest.py`` prints them at the end
of the session (run directly with ``python tests/test_acceptance.py`` to get
the same lines without pytest's summary).
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from silan.adapt import adapt_target, write_metrics_csv
from silan.cli import main
from silan.config import RunConfig
from silan.data import LabeledDataset
from silan.experiment import make_domains, pretrain, run_toy, seeded
from silan.nn import save_model

N_SEEDS = 5
RESULTS = {}


def record(number, title, passed, detail):
    RESULTS[number] = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}"
    print(RESULTS[number])
    return passed


def run_verify(suite, capsys):
    start = time.perf_counter()
    code = main(["verify", suite])
    elapsed = time.perf_counter() - start
    return code, capsys.readouterr().out, elapsed


def toy_config():
    base = RunConfig(n=1000, noise_std=0.1, rotation_deg=30.0)
    adapt = replace(base.adapt, k_t=3, k_s=3, tau=0.11, batch_size=32, learning_rate=1e-3, momentum=0.9)
    return replace(base, adapt=adapt)


def run_and_dump(directory):
    start = time.perf_counter()
    results = []
    for s in range(N_SEEDS):
        result = run_toy(seeded(toy_config(), s))
        write_metrics_csv(result.history, directory / f"metrics_{s}.csv")
        save_model(result.model_t, directory / f"model_t_{s}.json")
        results.append(result)
    return results, time.perf_counter() - start


@pytest.fixture(scope="module")
def toy_runs(tmp_path_factory):
    directory = tmp_path_factory.mktemp("toy_first")
    results, elapsed = run_and_dump(directory)
    return results, elapsed, directory


def test_criterion_1_gradient_oracle(capsys):
    code, out, elapsed = run_verify("gradcheck", capsys)
    worst = max(float(line.split("max rel err ")[1].split()[0]) for line in out.splitlines() if "max rel err" in line)
    ok = code == 0 and worst <= 1e-4 and elapsed < 30
    assert record(1, "gradient oracle", ok, f"max rel err {worst:.2e} <= 1e-4, {elapsed:.2f}s < 30s")


def test_criterion_2_infonce_lower_bound(capsys):
    code, out, elapsed = run_verify("prop1", capsys)
    ok = code == 0 and "1000/1000" in out and elapsed < 10
    assert record(2, "InfoNCE lower bound", ok, f"{out.splitlines()[0].split(': ', 1)[1]}, {elapsed:.2f}s < 10s")


def test_criterion_3_beam_constant(capsys):
    from silan.diagnostics import optimal_radius, solve_beam_condition

    code, out, elapsed = run_verify("beam", capsys)
    _, ratio = solve_beam_condition()
    numeric = optimal_radius(1.0, 10.0)
    ok = (code == 0 and abs(ratio - 1.5852) <= 5e-4 and abs(numeric - 1.5852) <= 0.01 * 1.5852
          and elapsed < 1)
    assert record(3, "optimal radius", ok,
                  f"R/sigma = {ratio:.5f} (1.5852 +/- 5e-4), golden-section R = {numeric:.5f}, {elapsed:.3f}s < 1s")


def test_criterion_4_knn_oracle(capsys):
    code, out, elapsed = run_verify("knn", capsys)
    ok = code == 0 and out.count("200/200") == 3 and elapsed < 1
    assert record(4, "kNN oracle", ok, f"K in {{1,3,5}} exact on 200 points, {elapsed:.3f}s < 1s")


def test_criterion_5_silan_stats(capsys):
    code, out, elapsed = run_verify("silan-stats", capsys)
    ok = code == 0 and elapsed < 10
    summary = "; ".join(line.split(": ", 1)[1] for line in out.splitlines()[:3])
    assert record(5, "augmentation statistics", ok, f"{summary}, {elapsed:.2f}s < 10s")


def test_criterion_6_toy_end_to_end(toy_runs):
    results, elapsed, _ = toy_runs
    src = [r.source_accuracy for r in results]
    base = np.mean([r.source_only_accuracy for r in results])
    adapted = np.mean([r.adapted_accuracy for r in results])
    gain = adapted - base
    ok = min(src) >= 0.99 and gain >= 0.05 and elapsed < 300
    per_seed = ", ".join(f"{r.gain:+.3f}" for r in results)
    assert record(6, "toy end-to-end", ok,
                  f"min source acc {min(src):.3f} >= 0.99; target {base:.4f} -> {adapted:.4f}, "
                  f"gain {gain * 100:+.2f} pp (need >= +5 pp; per seed {per_seed}); {elapsed:.1f}s < 300s")


def test_criterion_7_determinism(toy_runs, tmp_path):
    _, _, first = toy_runs
    run_and_dump(tmp_path)
    names = sorted(p.name for p in first.iterdir())
    same = [(first / name).read_bytes() == (tmp_path / name).read_bytes() for name in names]
    assert record(7, "determinism", len(names) == 2 * N_SEEDS and all(same),
                  f"{sum(same)}/{len(names)} metrics CSVs and model documents byte-identical")


def test_criterion_8_algorithm_fidelity():
    cfg = seeded(toy_config(), 0)
    ds_s, ds_t = make_domains(cfg)
    model_s = pretrain(cfg, ds_s)
    short = replace(cfg.adapt, epochs=3)

    identity, _ = adapt_target(model_s, ds_t, replace(cfg.adapt, epochs=0))
    init_ok = identity.equals(model_s)

    banks = []
    adapted, _ = adapt_target(model_s, ds_t, short, on_epoch=lambda e, m, bt, bs: banks.append(bs.features.tobytes()))
    blank = LabeledDataset(ds_t.X, np.zeros(len(ds_t), dtype=np.int64))
    blind, _ = adapt_target(model_s, blank, short)
    labels_ok = adapted.equals(blind)
    bank_ok = len(banks) == 3 and len(set(banks)) == 1

    assert record(8, "algorithm fidelity", init_ok and labels_ok and bank_ok,
                  f"epochs=0 identity {init_ok}; label-free trajectory {labels_ok}; "
                  f"frozen source bank identical over {len(banks)} epochs {bank_ok}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
