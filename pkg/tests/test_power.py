import numpy as np
import pytest

from coptrans import (
    InvalidParameter,
    estimate_power,
    make_tfdc_coefficient,
    tfdc_power_targets,
)
from coptrans.power import COEFFICIENTS


class TestEstimatePower:
    def test_noise_free_linear_spearman_is_one(self):
        res = estimate_power("linear", 0.0, "spearman", n_sims=50, sample_size=100, seed=1)
        assert res.power == 1.0
        assert res.coefficient == "spearman"

    def test_null_vs_null_calibration(self):
        res = estimate_power("linear", 0.5, "pearson", n_sims=200, sample_size=100,
                             seed=2, null_vs_null=True)
        # size should equal the 5% level within ~2 binomial sigmas
        sigma = np.sqrt(0.05 * 0.95 / 200)
        assert abs(res.power - 0.05) <= 2 * sigma + 1e-9

    def test_power_decreases_with_noise(self):
        powers = [
            estimate_power("linear", noise, "spearman", n_sims=50, sample_size=100, seed=3).power
            for noise in (0.0, 0.5, 2.0)
        ]
        assert powers[0] >= powers[1] - 0.05
        assert powers[1] >= powers[2] - 0.05

    def test_failing_coefficient_counts_as_non_rejection(self):
        def broken(x, y):
            raise RuntimeError("no value")

        broken.__name__ = "broken"
        res = estimate_power("linear", 0.0, broken, n_sims=20, sample_size=50, seed=4)
        assert res.power == 0.0

    def test_deterministic_bit_for_bit(self):
        a = estimate_power("quadratic", 1.0, "dcor", n_sims=30, sample_size=80, seed=5)
        b = estimate_power("quadratic", 1.0, "dcor", n_sims=30, sample_size=80, seed=5)
        assert a == b

    def test_validation(self):
        with pytest.raises(InvalidParameter):
            estimate_power("linear", 0.0, "spearman", n_sims=5, sample_size=50, seed=0)
        with pytest.raises(InvalidParameter):
            estimate_power("linear", 0.0, "nope", n_sims=20, sample_size=50, seed=0)

    def test_registry_contents(self):
        assert set(COEFFICIENTS) == {"pearson", "spearman", "dcor", "rdc"}


class TestTfdcPowerTargets:
    def test_counts_and_validity(self):
        spec = tfdc_power_targets(m=8, T_ref=2000, seed=0)
        assert len(spec.targets) == 8
        assert len(spec.forgets) == 1
        for t in spec.targets:
            assert abs(t.mass.sum() - 1.0) < 1e-9
            assert t.mass.min() >= 0.0

    def test_targets_stable_across_seeds(self):
        # Two independent large reference draws agree in total variation.
        # The diffuse high-frequency patterns sit near 0.04 at this T_ref
        # (TV shrinks like 1/sqrt(T_ref)). The step pattern is excluded: its
        # y has two rank atoms whose average rank straddles a bin edge, so
        # the occupied column flips between draws by construction.
        a = tfdc_power_targets(m=20, T_ref=100_000, seed=0)
        b = tfdc_power_targets(m=20, T_ref=100_000, seed=1)
        from coptrans.synth import POWER_PATTERNS
        for name, ta, tb in zip(POWER_PATTERNS, a.targets, b.targets):
            if name == "step":
                # structural stability instead: mass lives in two v-columns
                assert (ta.mass.sum(axis=0) > 1e-12).sum() == 2
                continue
            tv = 0.5 * np.abs(ta.mass - tb.mass).sum()
            assert tv <= 0.05

    def test_tfdc_coefficient_perfect_on_clean_linear(self):
        spec = tfdc_power_targets(m=8, T_ref=8000, seed=0)
        coeff = make_tfdc_coefficient(spec)
        rng = np.random.default_rng(6)
        x = rng.uniform(size=200)
        assert coeff(x, x) == 1.0  # clean linear copula is bit-equal to its target
        assert coeff.__name__ == "tfdc"
