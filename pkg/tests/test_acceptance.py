"""Acceptance suite: one test, and one summary line, per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL table is printed
in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import random_state, ref_rk4
from poptransfer import HamiltonianSpec, NoiseChannel, PiecewiseConstant, get_protocol, ground_state
from poptransfer.cli import run_cli
from poptransfer.experiments import (
    SweepSpec,
    dephasing_curves,
    raman_baseline,
    scan_total_time,
    sweep_decay,
    sweep_stray,
)
from poptransfer.experiments import Axis
from poptransfer.lindblad import build_hamiltonian, propagate_constant, propagate_schedule, transfer_population
from poptransfer.optimize import PowellConfig, optimize_ansatz, optimize_polynomial
from poptransfer.policy import PARAM_NAMES, TrainConfig, _forward, init_network, lstm_backward, lstm_forward
from poptransfer.policy import reinforce_grad_means, reinforce_loss, sample_actions, step_times, train

RESULTS: dict[int, str] = {}

pytestmark = pytest.mark.slow


def _record(n, title, ok, detail):
    RESULTS[n] = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    assert ok, RESULTS[n]


def test_1_protocol_reproduction():
    bounds = {
        "protocol1_T40": (40.0, (0.9974, 1.0), (0.009, 0.019)),
        "protocol1_T20": (20.0, (0.9948, 0.9988), (0.042, 0.053)),
        "protocol2_T40": (40.0, (0.9939, 0.9999), (0.010, 0.021)),
    }
    ok, parts = True, []
    for name, (T, ff, ee) in bounds.items():
        t0 = time.perf_counter()
        res = propagate_schedule(ground_state(), get_protocol(name), T)
        dt = time.perf_counter() - t0
        good = ff[0] <= res.final_target <= ff[1] and ee[0] <= res.max_excited <= ee[1] and dt < 1.0
        ok &= good
        parts.append(f"{name} rho_ff={res.final_target:.5f} max_ee={res.max_excited:.5f} ({dt:.2f}s)")
    _record(1, "protocol reproduction", ok, "; ".join(parts))


def test_2_ansatz_reoptimization():
    t0 = time.perf_counter()
    res = optimize_ansatz(40.0, "ansatz1", PowellConfig(restarts=5, seed=0))
    dt = time.perf_counter() - t0
    _record(2, "ansatz re-optimization", res.score >= 0.999,
            f"best {res.score:.6f} at {np.round(res.params, 3).tolist()} ({dt:.0f}s)")


def test_3_polynomial_optimization():
    t0 = time.perf_counter()
    res = optimize_polynomial(40.0, order=5, n_runs=10, cfg=PowellConfig(seed=0))
    dt = time.perf_counter() - t0
    _record(3, "polynomial optimization", res.score >= 0.995,
            f"best of 10 runs {res.score:.6f}, worst {min(res.run_scores):.6f} ({dt:.0f}s)")


def _rl_attempts(make_cfg, threshold):
    # Training reward uses the sink; the greedy schedule it found is then scored sink-free.
    lines = []
    for seed in range(5):
        cfg = make_cfg(seed)
        res = train(cfg)
        free = transfer_population(res.best_schedule, cfg.T).final_target
        lines.append(f"seed {seed}: sink-free {free:.4f} (sink-on {res.best_reward:.4f})")
        if free >= threshold:
            return True, lines
    return False, lines


def test_4_rl_training():
    ok_r, r_lines = _rl_attempts(lambda s: TrainConfig.restricted(seed=s), 0.99)
    ok_w, w_lines = _rl_attempts(lambda s: TrainConfig.wide(seed=s), 0.98)
    _record(4, "RL training", ok_r and ok_w,
            f"restricted [{'; '.join(r_lines)}], wide [{'; '.join(w_lines)}]")


def test_5_propagator_correctness():
    rng = np.random.default_rng(2024)
    worst, ok = 0.0, True
    for _ in range(100):
        dim = int(rng.integers(3, 5))
        spec = HamiltonianSpec(*rng.uniform(0.2, 2.0, 2))
        chans = [NoiseChannel.decay_eg(rng.uniform(0, 0.5)), NoiseChannel.decay_fe(rng.uniform(0, 0.5)),
                 NoiseChannel.dephase(int(rng.integers(0, 3)), rng.uniform(0, 0.5))]
        if dim == 4:
            chans.append(NoiseChannel.sink(rng.uniform(0, 1.0)))
        dp, d = rng.uniform(-5, 5, 2)
        T = rng.uniform(0.5, 5.0)
        rho0 = random_state(rng, dim)
        sched = PiecewiseConstant([[dp, d]])
        exact = propagate_schedule(rho0, sched, T, chans, n_samples=21, spec=spec, method="exact", keep_states=True)
        rk4 = propagate_schedule(rho0, sched, T, chans, n_samples=21, spec=spec, method="rk4", keep_states=True)
        worst = max(worst, np.max(np.abs(exact.states - rk4.states)))
        for rho in np.concatenate([exact.states, rk4.states]):
            ok &= abs(np.trace(rho) - 1) < 1e-7
            ok &= np.max(np.abs(rho - rho.conj().T)) < 1e-10
            ok &= np.linalg.eigvalsh(rho).min() > -1e-7
    # Independent oracle on a subset: plain RK4 written against the raw formula.
    H = build_hamiltonian(1.3, -0.4, dim=4)
    chans = [NoiseChannel.sink(0.3), NoiseChannel.dephase("f", 0.2)]
    rho0 = random_state(rng, 4)
    oracle = ref_rk4(rho0, lambda t: H, [c.operator(4) for c in chans], 1.0, 10_000)
    worst = max(worst, np.max(np.abs(propagate_constant(rho0, H, chans, 1.0) - oracle)))
    _record(5, "propagator correctness", ok and worst < 1e-6,
            f"100 random Lindbladians, max |exact - RK4| = {worst:.1e}, invariants {'hold' if ok else 'violated'}")


def test_6_gradient_correctness():
    net = init_network(5, 4, (0.07, 0.05), 17, scale=0.6)
    times = step_times(6)
    rng = np.random.default_rng(4)
    actions = sample_actions(lstm_forward(net, times), (0.3, 0.3), rng, 5)
    rewards = rng.uniform(size=5)
    mu, cache = _forward(net, times)
    grads = lstm_backward(net, cache, reinforce_grad_means(rewards, actions, mu, net.sigma))
    worst, n = 0.0, 0
    for name in PARAM_NAMES:
        p = net.params[name]
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + 1e-6
            up = reinforce_loss(rewards, actions, lstm_forward(net, times), net.sigma)
            p[idx] = old - 1e-6
            down = reinforce_loss(rewards, actions, lstm_forward(net, times), net.sigma)
            p[idx] = old
            fd = (up - down) / 2e-6
            g = grads[name][idx]
            worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), 1e-3))
            n += 1
    _record(6, "gradient correctness", worst < 1e-4, f"{n} parameters, max relative error {worst:.1e}")


def test_7_robustness_checks():
    p1, p2 = get_protocol("protocol1_T40"), get_protocol("protocol2_T40")
    checks = {}

    rates = np.linspace(0.005, 0.05, 4)
    ladder = sweep_decay(SweepSpec(p1, 40.0, "ladder", [Axis("gamma_eg", 0.0, 0.05, 11),
                                                        Axis("gamma_fe", 0.0, 0.05, 11)]))
    diag = [(ladder.final_rho_ff[0, i], ladder.final_rho_ff[i, 0]) for i in range(1, 11)]
    checks["ladder fe > eg damage"] = all(fe < eg for fe, eg in diag)

    curves = dephasing_curves(p1, 40.0, rates)
    checks["dephasing e least damaging"] = all(
        curves["e"].final_rho_ff[i] > max(curves["g"].final_rho_ff[i], curves["f"].final_rho_ff[i])
        for i in range(len(rates)))

    stray = sweep_stray(SweepSpec(p1, 40.0, "stray", [Axis("stray_dp", -2.0, 2.0, 5),
                                                      Axis("stray_d", -0.2, 0.2, 5)]))
    checks["stray d more sensitive"] = np.ptp(stray.final_rho_ff[2, :]) > np.ptp(stray.final_rho_ff[:, 2])
    s2 = sweep_stray(SweepSpec(p2, 40.0, "stray", [Axis("stray_dp", 0.0, 0.0, 1), Axis("stray_d", -0.2, 0.2, 5)]))
    row = s2.final_rho_ff[0]
    checks["protocol 2 sign asymmetry"] = bool(np.max(np.abs(row - row[::-1])) > 0.05)

    for proto, name in ((p1, "1"), (p2, "2")):
        v = scan_total_time(proto).final_rho_ff
        checks[f"time scan {name} non-monotone"] = bool(
            any(v[i] > v[i + 1:].min() + 1e-3 for i in range(len(v) - 1)))

    for T in (20.0, 40.0):
        r = raman_baseline(T)
        checks[f"raman below protocol 1 at T={T:g}"] = bool(r.extras["max_rho_ff"].max() < r.meta["reference"])

    failed = [k for k, v in checks.items() if not v]
    _record(7, "robustness checks", not failed,
            f"{len(checks) - len(failed)}/{len(checks)} hold" + (f", failing: {failed}" if failed else ""))


def test_8_determinism(tmp_path):
    import json

    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "train": {"n_epochs": 5, "n_batch": 10, "n_steps": 10, "T": 20.0},
        "sweep": {"scenario": "stray", "axes": [{"name": "stray_dp", "min": -1, "max": 1, "n_points": 3},
                                                {"name": "stray_d", "min": -0.1, "max": 0.1, "n_points": 3}]},
    }))
    same = []
    for cmd in ("train", "sweep", "simulate"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{cmd}{k}.csv"
            assert run_cli([cmd, "--config", str(cfg), "--seed", "11", "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        same.append(outs[0] == outs[1])
    _record(8, "determinism", all(same), f"train/sweep/simulate CSVs byte-identical: {same}")
