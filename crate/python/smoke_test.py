"""Smoke test for the klc_opi_py extension.

Build and run from the repository root:

    cargo build --release -p klc-opi-python --features extension-module
    cp target/release/libklc_opi_py.so python/klc_opi_py.so
    python3 python/smoke_test.py
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import klc_opi_py as k


def main():
    model = k.Model.stag_hare(grid_size=5, gamma=0.95)
    assert model.n_states == 625 and model.n_agents == 2
    assert model.decode(model.encode([20, 4])) == [20, 4]

    v_star, pi_star, iterations, residual = k.value_iteration(model, tol=1e-8)
    assert residual <= 1e-8, residual
    assert k.bellman_residual(model, v_star) <= 1e-8
    backup = k.apply_optimal_operator(model, v_star)
    assert max(abs(a - b) for a, b in zip(backup, v_star)) <= 1e-8

    v_pi = k.exact_policy_evaluation(model, pi_star)
    assert max(abs(a - b) for a, b in zip(v_pi, v_star)) <= 1e-6
    assert abs(sum(p for _, p in pi_star.row(0)) - 1.0) <= 1e-12

    out = k.train(model, iterations=50, m=20, seed=0, oracle=v_star)
    assert len(out["trace"]) == 50
    assert all(math.isfinite(x) for x in out["v"])
    assert out["trace"][-1]["sup_err_vstar"] is not None

    mean, std = k.monte_carlo_return(model, k.Policy.baseline(model), [11, 13], seed=1, episodes=20)
    assert abs(mean - (-178.618541)) <= 1e-6 and std == 0.0

    try:
        k.value_iteration(model, max_iters=2)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("expected non-convergence")

    print(f"ok: value iteration {iterations} iterations, V*(20,4) = {v_star[model.encode([20, 4])]:.4f}")


if __name__ == "__main__":
    main()
