import math

import numpy as np
import pytest

from mmvlimits.model import PriorParams, ProblemParams
from mmvlimits.phase import (
    axis,
    bisect_predicate,
    classify,
    evaluate_cell,
    from_db,
    phase_diagram,
    region_at,
    threshold,
    to_db,
)
from mmvlimits.replica import FreeEnergyProfile, mmse, pick_global, profile
from mmvlimits.se import bp_predicted_mse

DELTA_35 = 10 ** -3.5
PRIOR = PriorParams(0.1, 3)


def synthetic_profile(maxima, delta=1e-3, rho=0.1, degenerate=False):
    p = ProblemParams(PriorParams(rho, 3), delta, 0.2)
    grid = np.geomspace(1e-6, 0.1, 4)
    Fs = [F for _, F in maxima]
    return FreeEnergyProfile(p, grid, np.zeros(4), list(maxima), int(np.argmax(Fs)), degenerate)


class TestClassify:
    def test_low_branch_global_is_region_2(self):
        assert classify(synthetic_profile([(1e-3, 1.0 + 1e-3), (0.05, 1.0)])).value == 2

    def test_high_branch_global_is_region_3(self):
        assert classify(synthetic_profile([(1e-3, 1.0), (0.05, 1.0 + 1e-3)])).value == 3

    def test_single_maximum_split_by_branch(self):
        assert classify(synthetic_profile([(1e-4, 0.0)])).value == 1
        assert classify(synthetic_profile([(0.05, 0.0)])).value == 4

    def test_sweep_walks_through_all_regions(self):
        labels = [region_at(PRIOR, DELTA_35, R).value for R in (0.24, 0.2, 0.14, 0.13, 0.12, 0.11)]
        assert labels == [1, 1, 2, 3, 4, 4]
        seq = [labels[0]] + [b for a, b in zip(labels, labels[1:]) if b != a]
        assert seq == [1, 2, 3, 4]

    @pytest.mark.parametrize("delta,R", [(1e-4, 0.12), (1e-2, 0.5), (0.3, 0.05), (1e-5, 2.0)])
    def test_gaussian_prior_never_two_maxima(self, delta, R):
        label = region_at(PriorParams(1.0, 3), delta, R)
        assert label.value in (1, 4)

    def test_tie_prefers_smaller_E(self):
        assert pick_global([1.0, 1.0 + 5e-11]) == (0, True)
        assert pick_global([1.0, 1.0 + 1e-3]) == (1, False)
        assert pick_global([1.0 + 1e-3, 1.0]) == (0, False)


class TestThreshold:
    def test_bisection_contract_on_step(self):
        lo, hi = bisect_predicate(lambda R: R >= 0.17, 0.1, 0.3)
        assert hi - lo < 1e-4
        assert abs(0.5 * (lo + hi) - 0.17) <= 1e-4

    def test_not_found_is_nan(self):
        assert math.isnan(threshold("BP", PriorParams(1.0, 3), 1e-3, 0.11, 0.24, n_prescan=4))

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            threshold("spinodal", PRIOR, DELTA_35, 0.11, 0.24)

    @pytest.mark.slow
    def test_ordering_at_fixed_noise(self):
        Rc, Rl, Rbp = (threshold(k, PRIOR, DELTA_35, 0.11, 0.24) for k in ("critical", "low_noise", "BP"))
        assert Rc <= Rl <= Rbp
        assert region_at(PRIOR, DELTA_35, Rbp + 2e-4).value == 1
        assert region_at(PRIOR, DELTA_35, Rbp - 2e-4).value == 2
        assert region_at(PRIOR, DELTA_35, Rc - 2e-4).value == 4

    @pytest.mark.slow
    def test_critical_rate_approaches_sparsity(self):
        prior = PriorParams(0.1, 1)
        r5 = threshold("critical", prior, 1e-5, 0.1, 0.3)
        r6 = threshold("critical", prior, 1e-6, 0.1, 0.3)
        assert r6 < r5
        assert 0.10 <= r6 <= 0.13


class TestPhaseDiagram:
    def test_single_cell_matches_direct_calls(self):
        (cell,) = phase_diagram(PRIOR, (-35.0, -35.0, 1), (0.14, 0.14, 1))
        p = ProblemParams(PRIOR, float(from_db(-35.0)), 0.14)
        assert cell.mmse == mmse(p)
        assert cell.region == classify(profile(p)).value
        assert cell.bp_mse == bp_predicted_mse(p)

    def test_order_is_delta_major(self):
        cells = phase_diagram(PRIOR, (-40.0, -30.0, 2), (0.2, 0.24, 2))
        assert [(c.delta_dB, c.R) for c in cells] == [(-40.0, 0.2), (-40.0, 0.24), (-30.0, 0.2), (-30.0, 0.24)]

    def test_failed_cell_is_reported_not_raised(self):
        cell = evaluate_cell(PRIOR, -35.0, -1.0)
        assert math.isnan(cell.mmse) and cell.anomalies

    def test_db_round_trip(self):
        assert to_db(1e-3) == pytest.approx(-30.0)
        assert from_db(-35.0) == pytest.approx(DELTA_35)

    def test_axis(self):
        np.testing.assert_allclose(axis((0.1, 0.2, 3)), [0.1, 0.15, 0.2], rtol=1e-15)
        with pytest.raises(ValueError):
            axis((0.1, 0.2, 0))
