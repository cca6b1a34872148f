import math

import numpy as np
import pytest

from memreservoir import EvoConfig, EvoResult, StructuralError, evolve

QUAD_BOUNDS = ((0.0, 10.0), (0.0, 1.0))


def quadratic(s, d):
    return -((s - 3.0) ** 2) - (d - 0.1) ** 2


def grid_search_optimum(resolution=0.01):
    best = (-math.inf, None)
    for s in np.arange(0.0, 10.0 + 1e-9, resolution):
        for d in np.arange(0.0, 1.0 + 1e-9, resolution):
            f = quadratic(s, d)
            if f > best[0]:
                best = (f, (s, d))
    return best[1]


class TestEvolve:
    def test_constant_objective_flat_history(self):
        result = evolve(lambda s, d: 0.5, EvoConfig(bounds=QUAD_BOUNDS, generations=10, seed=0))
        assert result.best_fitness == 0.5
        assert all(f == 0.5 for f in result.history)

    def test_quadratic_reaches_grid_search_optimum(self):
        # oracle: dense grid search at resolution 0.01 finds (3.00, 0.10)
        target = grid_search_optimum()
        assert target == pytest.approx((3.0, 0.1), abs=1e-9)
        for seed in range(5):
            result = evolve(quadratic, EvoConfig(bounds=QUAD_BOUNDS, seed=seed))
            distance = math.hypot(result.best_params[0] - target[0],
                                  result.best_params[1] - target[1])
            assert distance < 0.1, f"seed {seed}: {result.best_params}"

    def test_history_monotone_under_elitism(self):
        result = evolve(quadratic, EvoConfig(bounds=QUAD_BOUNDS, seed=3))
        assert all(b >= a for a, b in zip(result.history, result.history[1:]))

    def test_bounds_respected(self):
        seen = []

        def spy(s, d):
            seen.append((s, d))
            return quadratic(s, d)

        evolve(spy, EvoConfig(bounds=((2.0, 4.0), (0.05, 0.2)), generations=20, seed=1))
        assert all(2.0 <= s <= 4.0 and 0.05 <= d <= 0.2 for s, d in seen)

    def test_evaluation_budget_accounting(self):
        calls = [0]

        def counting(s, d):
            calls[0] += 1
            return quadratic(s, d)

        config = EvoConfig(bounds=QUAD_BOUNDS, population=6, generations=12, seed=2)
        result = evolve(counting, config)
        expected = 6 + 6 * 12  # initial population plus one population per generation
        assert calls[0] == expected
        assert result.evaluations == expected

    def test_deterministic_given_seed(self):
        config = EvoConfig(bounds=QUAD_BOUNDS, seed=11)
        r1 = evolve(quadratic, config)
        r2 = evolve(quadratic, config)
        assert r1 == r2

    def test_non_finite_fitness_discarded_with_warning(self):
        def spiky(s, d):
            return math.nan if s > 5.0 else quadratic(s, d)

        with pytest.warns(RuntimeWarning, match="non-finite"):
            result = evolve(spiky, EvoConfig(bounds=QUAD_BOUNDS, generations=15, seed=4))
        assert math.isfinite(result.best_fitness)
        assert result.best_params[0] <= 5.0

    def test_generation_log_written(self, tmp_path):
        log = tmp_path / "trace.log"
        evolve(quadratic, EvoConfig(bounds=QUAD_BOUNDS, generations=5, seed=5),
               log_path=str(log))
        lines = log.read_text().strip().splitlines()
        assert len(lines) == 5
        first = lines[0].split(",")
        assert len(first) == 5  # generation, best, mean, steepness, delta
        assert first[0] == "0"

    def test_config_validation(self):
        with pytest.raises(StructuralError):
            EvoConfig(bounds=QUAD_BOUNDS, population=1)
        with pytest.raises(StructuralError):
            EvoConfig(bounds=((1.0, 0.0), (0.0, 1.0)))
        with pytest.raises(StructuralError):
            EvoConfig(bounds=QUAD_BOUNDS, elitism=8, population=8)

    def test_result_type(self):
        result = evolve(quadratic, EvoConfig(bounds=QUAD_BOUNDS, generations=2, seed=6))
        assert isinstance(result, EvoResult)
        assert len(result.history) == 2
