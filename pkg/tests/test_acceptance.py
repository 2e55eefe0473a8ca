"""Full-length experiments on the shipped configs. Minutes each; run with ``pytest -m slow``."""

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from symot.config import load_experiment
from symot.data import prepare_data
from symot.evaluation import evaluate, ot_trend, sweep_beta
from symot.flow import roundtrip_error
from symot.training import default_bank, train

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
PAIRS = ["moons2circles", "gauss2gauss", "eightgauss", "lineargauss"]
SWEEP_BETAS = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
# moving-average window, in epochs; the first full window is the reference
WINDOW = 20


@lru_cache(maxsize=None)
def run(name: str, *overrides: str):
    config = load_experiment(CONFIGS / f"{name}.cfg", ["log_every=0", *overrides])
    sets = prepare_data(config)
    bank = default_bank(sets.x_train, sets.z_train, config.train)
    model, trace = train(sets.x_train, sets.z_train, config.train, bank=bank)
    return model, trace, evaluate(model, bank, sets.x_test, sets.z_test), sets


def smoothed_totals(trace) -> np.ndarray:
    totals = np.array([b.total for b in trace])
    return np.convolve(totals, np.ones(WINDOW) / WINDOW, mode="valid")


def test_moons_to_circles_beats_the_mmd_only_map():
    _, _, symot, _ = run("moons2circles")
    _, _, single, _ = run("moons2circles", "beta=0")
    assert symot.mmd_fwd < 1e-2
    assert symot.mmd_bwd < 1e-2
    assert 2 * symot.ot_fwd < single.ot_fwd


def test_mmd_only_training_converges():
    _, trace, report, _ = run("moons2circles", "beta=0", "epochs=300")
    assert report.mmd_fwd < 0.05
    assert smoothed_totals(trace)[-1] < smoothed_totals(trace)[0]


@pytest.mark.parametrize("name", PAIRS)
def test_smoothed_loss_never_rises_above_its_first_window(name):
    _, trace, _, _ = run(name)
    smoothed = smoothed_totals(trace)
    assert np.all(smoothed[1:] <= smoothed[0]), int(np.argmax(smoothed[1:] > smoothed[0])) + WINDOW + 1


def test_trained_model_stays_invertible():
    model, _, _, _ = run("moons2circles")
    x = np.random.default_rng(11).uniform(-4, 4, (1000, 2))
    assert roundtrip_error(model, x) < 1e-8


def test_beta_sweep_trades_ot_cost_for_mmd():
    config = load_experiment(CONFIGS / "gauss2gauss.cfg", ["log_every=0"])
    rows = sweep_beta(config.train, SWEEP_BETAS, prepare_data(config))
    assert ot_trend(rows) <= -0.8
    assert rows[-1].ot < 0.01 * rows[0].ot
    inversions = sum(1 for a, b in zip(rows, rows[1:]) if b.mmd < a.mmd)
    assert inversions <= 1


def test_symmetric_loss_improves_the_backward_map():
    wins = 0
    for name in PAIRS:
        _, _, both, _ = run(name)
        _, _, one_way, _ = run(name, "symmetric=false")
        wins += both.mmd_bwd < one_way.mmd_bwd
    assert wins >= 3
