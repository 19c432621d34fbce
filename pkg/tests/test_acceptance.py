"""Acceptance gate: every criterion runs at its stated tolerance and prints
one PASS/FAIL line.  Run with `pytest tests/test_acceptance.py -v -s`.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest

from situlabel.cli import load_dataset_dir, run_compare, run_simulate
from situlabel.dataset import (
    WindowConfig,
    stack_windows,
    stratified_kfold,
    stratified_kfold_labels,
    windows_from_bundle,
    window_count,
)
from situlabel.mechanisms import (
    InputEvent,
    TouchConfig,
    TouchMachine,
    TwoButtonConfig,
    TwoButtonMachine,
    load_golden_vector,
    replay_golden_vector,
)
from situlabel.report import fmt_stat, render_mcnemar_grid, render_qf_table
from situlabel.rnn import ModelSpec, RnnModel, TrainConfig, train_arrays, train_fold
from situlabel.simulate import (
    LabellerModel,
    RouteScript,
    RouteSegment,
    default_gait,
    default_route,
    draw_labellers,
    noise_free_labeller,
    simulate_session,
)
from situlabel.stats import chi2_sf, cochran_q, mcnemar, rm_anova_f
from situlabel.stream import ActivityLabel

from conftest import golden_files
from oracles import two_pass_rm_anova
from test_rnn_gradients import GRADCHECK_SPECS, max_relative_error

from scipy import stats as scipy_stats

W, U, D = ActivityLabel.WALKING, ActivityLabel.UPSTAIRS, ActivityLabel.DOWNSTAIRS


def _verdict(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            print(f"\n[ACCEPTANCE] {name}: {status}")
            return False

    return _Ctx()


# ---------------------------------------------------------------------------
# 1. gradient oracle
# ---------------------------------------------------------------------------


def test_gradient_oracle():
    with _verdict("gradient oracle (GRU/LSTM/stacked + batch norm, rel err < 1e-4)"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        x = rng.normal(size=(4, 20, 9))
        y = rng.integers(0, 3, size=4)
        for name, spec in GRADCHECK_SPECS.items():
            model = RnnModel(spec, seed=11, dtype=np.float64)
            err = max_relative_error(model, x, y, step=1e-5)
            assert err < 1e-4, f"{name}: rel err {err:.2e}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"gradcheck took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 2. statistics oracles
# ---------------------------------------------------------------------------


def test_statistics_oracles():
    with _verdict("statistics oracles (Cochran fixture, McNemar exact, chi2, F)"):
        fixture = np.array([[1, 1, 0], [1, 0, 0], [1, 1, 1], [0, 0, 0]])
        q = cochran_q(fixture)
        assert q.statistic == pytest.approx(3.0, abs=1e-12)
        assert q.p == pytest.approx(math.exp(-1.5), abs=1e-6)

        a = np.array([1] * 10 + [1] * 5 + [0] * 1)
        b = np.array([1] * 10 + [0] * 5 + [1] * 1)
        assert mcnemar(a, b).p == 0.21875

        for x in np.linspace(0.0, 20.0, 401):
            assert abs(chi2_sf(float(x), 2) - math.exp(-x / 2.0)) < 1e-12

        rng = np.random.default_rng(9)
        for _ in range(25):
            m = (rng.random((rng.integers(4, 60), 3)) < rng.uniform(0.2, 0.9)).astype(int)
            ss_cls, ss_res, df1, df2 = two_pass_rm_anova(m)
            if ss_res <= 1e-12:
                continue
            f_oracle = (ss_cls / df1) / (ss_res / df2)
            p_oracle = scipy_stats.f.sf(f_oracle, df1, df2)
            res = rm_anova_f(m)
            assert abs(res.statistic - f_oracle) < 1e-10
            assert abs(res.p - p_oracle) < 1e-10


# ---------------------------------------------------------------------------
# 3. windowing exactness
# ---------------------------------------------------------------------------


def test_windowing_exactness():
    with _verdict("windowing exactness (N=1000,T=100,ov=20 -> 12 windows; closed form)"):
        from situlabel.stream import LabelledSample, SensorFrame

        def make(n):
            return [
                LabelledSample(
                    SensorFrame(i * 20, (0.0, 0.0, 9.81), (0.0,) * 3, (0.0,) * 3), W
                )
                for i in range(n)
            ]

        from situlabel.dataset import make_windows

        windows = make_windows(make(1000), WindowConfig(length=100, overlap=20))
        assert len(windows) == 12
        assert [w.start_t_ms // 20 for w in windows] == [80 * i for i in range(12)]

        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(0, 600))
            t = int(rng.integers(1, 150))
            overlap = int(rng.integers(0, t))
            cfg = WindowConfig(length=t, overlap=overlap, purity_min=0.0)
            got = len(make_windows(make(n), cfg))
            assert got == window_count(n, t, cfg.step)
            assert got == (max(0, (n - t) // (t - overlap) + 1) if n >= t else 0)


# ---------------------------------------------------------------------------
# 4. mechanism golden vectors + fuzz
# ---------------------------------------------------------------------------


def test_mechanism_golden_vectors_and_fuzz():
    with _verdict("mechanism golden vectors replay + 1e4-sequence fuzz"):
        paths = golden_files()
        assert len(paths) == 6
        for path in paths:
            emitted, expected = replay_golden_vector(load_golden_vector(path))
            assert emitted == expected, path.name

        rng = np.random.default_rng(77)
        cfg = TwoButtonConfig(150, 400)
        for _ in range(5000):
            m = TwoButtonMachine(cfg)
            t = 0
            downs = {"a": [], "b": []}
            emissions = []
            for _step in range(12):
                t += int(rng.integers(0, 250))
                button = "a" if rng.random() < 0.5 else "b"
                kind = "button_down" if rng.random() < 0.7 else "button_up"
                if kind == "button_down":
                    downs[button].append(t)
                out = m.step(InputEvent(t, kind, button))
                if out:
                    emissions.append(out)
            out = m.flush()
            if out:
                emissions.append(out)
            for a, b in zip(emissions, emissions[1:]):
                assert b.t_ms - a.t_ms >= cfg.lockout_ms
            for e in emissions:
                if e.label == W:
                    assert any(
                        abs(ta - tb) <= cfg.simultaneity_window_ms
                        for ta in downs["a"] for tb in downs["b"]
                    )

        touch_cfg = TouchConfig(300, 600, 200)
        for _ in range(5000):
            m = TouchMachine(touch_cfg)
            t, raw = 0, 1
            out = []
            while raw < 1023:
                r = m.step(InputEvent(t, "force", min(raw, 1023)))
                if r:
                    out.append(r.label)
                t += int(rng.integers(40, 100))
                raw += int(rng.integers(10, 55))
            r = m.flush(t + 300)
            if r:
                out.append(r.label)
            assert out == [W, D, U]


# ---------------------------------------------------------------------------
# 5 & 6. end-to-end sanity and noise-free sanity
# ---------------------------------------------------------------------------


def _simulate_windows(labellers, gait, seed_base=1000):
    wc = WindowConfig(length=100, overlap=20)
    windows = []
    for u, lab in enumerate(labellers):
        result = simulate_session(default_route(), "three_button", lab, gait,
                                  seed=seed_base + u, user=f"user{u}")
        windows.extend(windows_from_bundle(result.bundle, wc))
    return windows


PAPER_RECIPE = TrainConfig(learning_rate=0.0025, batch_size=32, epochs=10,
                           folds=10, seed=0)


def test_end_to_end_sanity():
    with _verdict("end-to-end sanity (10 users, GRU recipe: acc >= 0.85; "
                  "balanced permuted control 1/3 +/- 0.08; < 10 min)"):
        t0 = time.perf_counter()
        windows = _simulate_windows(draw_labellers(10, seed=0), default_gait())
        x, y = stack_windows(windows)
        plan = stratified_kfold(windows, PAPER_RECIPE.folds, PAPER_RECIPE.seed)
        history = train_arrays(x, y, ModelSpec.gru(hidden=64), PAPER_RECIPE, plan)
        assert history.mean_accuracy >= 0.85, f"accuracy {history.mean_accuracy:.4f}"

        # chance-level control: balance classes so chance is exactly 1/3,
        # then permute the labels
        rng = np.random.default_rng(123)
        n_min = int(np.bincount(y).min())
        keep = np.concatenate([
            rng.choice(np.flatnonzero(y == c), n_min, replace=False) for c in range(3)
        ])
        keep.sort()
        y_perm = rng.permutation(y[keep])
        plan_perm = stratified_kfold_labels(y_perm, PAPER_RECIPE.folds, PAPER_RECIPE.seed)
        control = train_arrays(x[keep], y_perm, ModelSpec.gru(hidden=64),
                               PAPER_RECIPE, plan_perm)
        assert abs(control.mean_accuracy - 1 / 3) <= 0.08, (
            f"permuted control {control.mean_accuracy:.4f}"
        )
        elapsed = time.perf_counter() - t0
        assert elapsed < 600.0, f"end-to-end took {elapsed:.0f}s"
        print(f"\n  accuracy={history.mean_accuracy:.4f} "
              f"control={control.mean_accuracy:.4f} elapsed={elapsed:.0f}s")


def test_noise_free_sanity():
    with _verdict("noise-free sanity (sigma=0, delays 0 -> CV accuracy = 1.0)"):
        windows = _simulate_windows([noise_free_labeller()] * 10, default_gait(0.0))
        x, y = stack_windows(windows)
        plan = stratified_kfold(windows, PAPER_RECIPE.folds, PAPER_RECIPE.seed)
        history = train_arrays(x, y, ModelSpec.gru(hidden=64), PAPER_RECIPE, plan)
        assert history.mean_accuracy == 1.0, f"accuracy {history.mean_accuracy:.4f}"


# ---------------------------------------------------------------------------
# 7. speed property
# ---------------------------------------------------------------------------


def test_gru_trains_faster_than_lstm():
    with _verdict("speed property (GRU mean epoch time < LSTM, 5 seeded runs)"):
        route = RouteScript((RouteSegment(W, 20), RouteSegment(U, 20),
                             RouteSegment(D, 20)))
        result = simulate_session(route, "three_button", noise_free_labeller(),
                                  default_gait(), seed=5)
        windows = windows_from_bundle(result.bundle, WindowConfig(100, 20))
        x, y = stack_windows(windows)
        plan = stratified_kfold(windows, 2, seed=0)
        config = TrainConfig(epochs=3, folds=2, seed=0)

        def epoch_times(name, seed):
            fold = train_fold(x, y, plan, 0, ModelSpec.by_name(name, hidden=128),
                              TrainConfig(epochs=3, folds=2, seed=seed), seed)
            return fold.epoch_seconds[1:]  # skip the warm-up epoch

        epoch_times("gru", 0)  # process warm-up
        ratios = []
        for seed in range(5):
            gru_t = float(np.mean(epoch_times("gru", seed)))
            lstm_t = float(np.mean(epoch_times("lstm", seed)))
            ratios.append(gru_t / lstm_t)
        mean_ratio = float(np.mean(ratios))
        assert mean_ratio < 1.0, f"GRU/LSTM epoch-time ratio {mean_ratio:.3f}"
        print(f"\n  mean GRU/LSTM epoch-time ratio: {mean_ratio:.3f}")


# ---------------------------------------------------------------------------
# 8. report-shape reproduction
# ---------------------------------------------------------------------------

REPORT_ARTIFACTS = [
    "accuracy_table.txt", "accuracy.csv", "epoch_curves.csv", "f1_table.txt",
    "f1.csv", "qf_table.txt", "qf.csv", "mcnemar_tables.txt", "mcnemar.csv",
    "results.json",
]

SMALL_ROUTE = RouteScript((
    RouteSegment(W, 10), RouteSegment(U, 6), RouteSegment(D, 6),
    RouteSegment(W, 10), RouteSegment(D, 6), RouteSegment(U, 6),
))


def _small_pipeline(out_root: Path, seed: int) -> Path:
    data_dir = out_root / "data"
    report_dir = out_root / "report"
    run_simulate(data_dir, ["three_button", "app"], n_users=2, seed=seed,
                 route=SMALL_ROUTE,
                 labeller=LabellerModel(reaction_median_ms=300.0, mislabel_prob=0.05))
    run_compare(load_dataset_dir(data_dir), ["gru", "lstm", "stacked"],
                WindowConfig(length=50, overlap=10),
                TrainConfig(epochs=2, folds=3, seed=seed), hidden=8,
                out_dir=report_dir)
    return report_dir


def test_report_shape_reproduction(tmp_path):
    with _verdict("report shapes (4 artifact families + byte-exact fixtures)"):
        report_dir = _small_pipeline(tmp_path, seed=0)
        for name in REPORT_ARTIFACTS:
            assert (report_dir / name).exists(), name
        acc_lines = (report_dir / "accuracy.csv").read_text().splitlines()
        assert acc_lines[0] == "mechanism,model,fold,accuracy"
        curve_lines = (report_dir / "epoch_curves.csv").read_text().splitlines()
        assert curve_lines[0] == "mechanism,model,fold,epoch,train_loss,train_accuracy"
        f1_header = (report_dir / "f1_table.txt").read_text().splitlines()[1].split()
        assert f1_header == ["technique", "Downstairs", "Walking", "Upstairs"]
        qf_header = (report_dir / "qf_table.txt").read_text().splitlines()[1].split()
        assert qf_header == ["technique", "cochran_q", "q_p", "f_test", "f_p"]
        grid_text = (report_dir / "mcnemar_tables.txt").read_text()
        for line in grid_text.splitlines():
            cells = line.split()
            if cells and cells[0] in ("gru", "lstm", "stacked"):
                idx = ["gru", "lstm", "stacked"].index(cells[0])
                assert cells[1 + idx] == "NA"

        # rendering fixtures, byte-exact from given inputs
        table = render_qf_table({"app": (13.241, 0.001, 6.852, 0.001)})
        row = next(l for l in table.splitlines() if l.startswith("app"))
        assert row.split() == ["app", "13.241", "0.001", "6.852", "0.001"]
        grid = render_mcnemar_grid(
            ["gru", "lstm", "stacked"],
            {("gru", "lstm"): 0.228, ("gru", "stacked"): 0.125,
             ("lstm", "stacked"): 0.546},
            title="McNemar p values: two_opposite_buttons",
        )
        rows = {l.split()[0]: l.split()[1:] for l in grid.splitlines()[2:]}
        assert rows["gru"][1] == "0.228" and rows["lstm"][0] == "0.228"
        assert rows["gru"][0] == rows["lstm"][1] == rows["stacked"][2] == "NA"
        assert fmt_stat(13.241) == "13.241" and fmt_stat(0.001) == "0.001"


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------


def test_full_pipeline_deterministic(tmp_path):
    with _verdict("determinism (simulate -> train -> compare byte-for-byte)"):
        dir_a = _small_pipeline(tmp_path / "a", seed=42)
        dir_b = _small_pipeline(tmp_path / "b", seed=42)
        for name in REPORT_ARTIFACTS:
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name
        for csv in sorted((tmp_path / "a" / "data").glob("*.csv")):
            twin = tmp_path / "b" / "data" / csv.name
            assert csv.read_bytes() == twin.read_bytes(), csv.name
