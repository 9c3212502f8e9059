import numpy as np
import pytest

from partialid.ate import AteSummary, naive_estimate
from partialid.data import Interval, ObservedLaw, empirical_law
from partialid.errors import InfeasibleProgramError, ValidationError
from partialid.lp import build_state_space, solve_bounds
from partialid.mediation import (MONOTONE_TRIPLE, MediationEffects, build_nde_program,
                                 identified_effects, mediation_effects, nde_bounds,
                                 nde_bounds_monotone, nie_bounds, total_effect)
from util import cholestyramine_counts, pushforward_law, random_latent_law, random_observed_law


def law_from_cells(**kw):
    cells = {(y, s, z): 0.0 for y in (0, 1) for s in (0, 1) for z in (0, 1)}
    for key, v in kw.items():
        y, s, z = (int(ch) for ch in key[1:])
        cells[(y, s, z)] = v
    return ObservedLaw.from_cells(cells)


def random_monotone_law(rng):
    space = build_state_space(assumptions=MONOTONE_TRIPLE)
    return pushforward_law(space, random_latent_law(rng, space))


class TestTotalEffect:
    def test_cholestyramine_margin(self):
        law = empirical_law(cholestyramine_counts())
        assert total_effect(law) == pytest.approx(0.546 - 0.081, abs=1e-12)

    def test_identical_arms(self):
        arm = {(0, 0): 0.4, (0, 1): 0.3, (1, 0): 0.2, (1, 1): 0.1}
        cells = {(y, s, z): arm[(y, s)] for (y, s) in arm for z in (0, 1)}
        same = ObservedLaw.from_cells(cells)
        assert total_effect(same) == 0.0

    def test_matches_outcome_margin_naive(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            law = random_observed_law(rng)
            summary = AteSummary.from_law(law)
            assert total_effect(law) == pytest.approx(naive_estimate(summary), abs=1e-12)


class TestNdeBounds:
    def test_degenerate_collapse(self):
        law = law_from_cells(p100=1.0, p101=1.0)
        for z in (0, 1):
            iv = nde_bounds(law, z)
            assert iv.lo == pytest.approx(iv.hi, abs=1e-12)

    def test_deterministic_law(self):
        law = law_from_cells(p111=1.0, p000=1.0)
        assert nde_bounds(law, 0) == Interval(0.0, 1.0)

    def test_z_validation(self):
        law = random_observed_law(np.random.default_rng(0))
        with pytest.raises(ValidationError):
            nde_bounds(law, 2)

    def test_matches_lp_on_random_laws(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            law = random_observed_law(rng)
            for z in (0, 1):
                closed = nde_bounds(law, z)
                lp = solve_bounds(build_nde_program(law, z)).interval
                assert closed.lo == pytest.approx(lp.lo, abs=1e-9)
                assert closed.hi == pytest.approx(lp.hi, abs=1e-9)


class TestNdeBoundsMonotone:
    def test_collapse_condition(self):
        # equal untreated-mediator outcome cells and matched differences
        law = law_from_cells(p100=0.1, p101=0.1, p010=0.3, p011=0.2,
                             p110=0.2, p111=0.3, p000=0.4, p001=0.4)
        iv = nde_bounds_monotone(law)
        assert iv.lo == pytest.approx(iv.hi, abs=1e-12)

    def test_no_effect_law(self):
        arm = {"p000": 0.4, "p010": 0.3, "p100": 0.2, "p110": 0.1}
        both = dict(arm)
        both.update({k[:3] + "1": v for k, v in arm.items()})
        law = law_from_cells(**both)
        iv = nde_bounds_monotone(law)
        assert iv.lo == 0
        assert iv.hi == pytest.approx(0.0, abs=1e-12)

    def test_contained_in_plain_bounds(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            law = random_monotone_law(rng)
            mono = nde_bounds_monotone(law)
            for z in (0, 1):
                assert nde_bounds(law, z).contains_interval(mono, tol=1e-9)
                assert mono.width <= nde_bounds(law, z).width + 1e-9

    def test_matches_lp_on_monotone_laws(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            law = random_monotone_law(rng)
            mono = nde_bounds_monotone(law)
            for z in (0, 1):
                lp = solve_bounds(build_nde_program(law, z, MONOTONE_TRIPLE)).interval
                assert mono.lo == pytest.approx(lp.lo, abs=1e-9)
                assert mono.hi == pytest.approx(lp.hi, abs=1e-9)

    def test_assumption_violation_raises(self):
        # mediator strictly less likely under treatment: S(0) <= S(1) impossible
        law = law_from_cells(p110=0.8, p000=0.2, p101=0.7, p001=0.3)
        with pytest.raises(InfeasibleProgramError):
            nde_bounds_monotone(law)


class TestNieBounds:
    def test_recomposition_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            law = random_observed_law(rng)
            te = total_effect(law)
            for z in (0, 1):
                nie = nie_bounds(law, z)
                nde = nde_bounds(law, 1 - z)
                assert nie.lo + nde.hi == pytest.approx(te, abs=1e-12)
                assert nie.hi + nde.lo == pytest.approx(te, abs=1e-12)

    def test_width_translation(self):
        law = random_observed_law(np.random.default_rng(33))
        for z in (0, 1):
            assert nie_bounds(law, z).width == pytest.approx(
                nde_bounds(law, 1 - z).width, abs=1e-12)

    def test_identical_arms_symmetric(self):
        cells = {}
        arm = ((0.4, 0.1), (0.3, 0.2))  # [s][y]
        for z in (0, 1):
            for s in (0, 1):
                for y in (0, 1):
                    cells[(y, s, z)] = arm[s][y]
        law = ObservedLaw.from_cells(cells)
        assert total_effect(law) == 0.0
        nie = nie_bounds(law, 0)
        nde = nde_bounds(law, 1)
        assert (nie.lo, nie.hi) == (-nde.hi, -nde.lo)


class TestIdentified:
    def test_mediator_independent_of_treatment(self):
        cells = {}
        for z in (0, 1):
            ps1 = 0.4
            mean = {0: 0.2 + 0.5 * z, 1: 0.6 - 0.1 * z}
            for s, ps in ((0, 1 - ps1), (1, ps1)):
                cells[(1, s, z)] = ps * mean[s]
                cells[(0, s, z)] = ps * (1 - mean[s])
        law = ObservedLaw.from_cells(cells)
        eff = identified_effects(law)
        assert eff.identified_nie == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_outcome_free_of_mediator(self):
        cells = {}
        for z in (0, 1):
            mean = 0.3 + 0.4 * z
            for s, ps in ((0, 0.5 + 0.2 * z), (1, 0.5 - 0.2 * z)):
                cells[(1, s, z)] = ps * mean
                cells[(0, s, z)] = ps * (1 - mean)
        law = ObservedLaw.from_cells(cells)
        eff = identified_effects(law)
        assert eff.identified_nde == pytest.approx((0.4, 0.4), abs=1e-12)
        assert eff.identified_nie == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_decomposition_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            law = random_observed_law(rng)
            try:
                eff = identified_effects(law)
            except ValidationError:
                continue
            te = total_effect(law)
            assert eff.identified_nde[0] + eff.identified_nie[1] == pytest.approx(te, abs=1e-12)
            assert eff.identified_nde[1] + eff.identified_nie[0] == pytest.approx(te, abs=1e-12)

    def test_empty_cell_error_names_cell(self):
        law = law_from_cells(p011=1.0, p010=1.0)
        with pytest.raises(ValidationError, match=r"S=0"):
            identified_effects(law)

    def test_identified_inside_bounds_under_generating_assumptions(self):
        # latent law with outcome coordinates independent of mediator coordinates
        rng = np.random.default_rng(31)
        space = build_state_space()
        y_idx = {(z, s): space.coord(f"Y({z},{s})") for z in (0, 1) for s in (0, 1)}
        for _ in range(40):
            py = rng.dirichlet(np.ones(16))  # joint over (y00,y01,y10,y11)
            ps = rng.dirichlet(np.ones(4))   # joint over (s0,s1)
            q = []
            for st_ in space.states:
                yi = (st_[0] << 3) | (st_[1] << 2) | (st_[2] << 1) | st_[3]
                si = (st_[4] << 1) | st_[5]
                q.append(float(py[yi] * ps[si]))
            law = pushforward_law(space, q)
            eff = identified_effects(law)
            # truth from the latent law
            for z in (0, 1):
                truth = sum(
                    qv * (st_[y_idx[(1, st_[4 + z])]] - st_[y_idx[(0, st_[4 + z])]])
                    for st_, qv in zip(space.states, q))
                assert eff.identified_nde[z] == pytest.approx(truth, abs=1e-9)
                assert nde_bounds(law, z).contains(truth, tol=1e-9)


class TestMediationEffectsContainer:
    def test_monotone_bundle(self):
        rng = np.random.default_rng(40)
        law = random_monotone_law(rng)
        eff = mediation_effects(law, monotone=True)
        assert eff.nde0 == eff.nde1 == nde_bounds_monotone(law)

    def test_inconsistent_identified_values_rejected(self):
        law = random_observed_law(np.random.default_rng(1))
        with pytest.raises(ValidationError, match="total"):
            MediationEffects(total=total_effect(law),
                             nde0=nde_bounds(law, 0), nde1=nde_bounds(law, 1),
                             nie0=nie_bounds(law, 0), nie1=nie_bounds(law, 1),
                             identified_nde=(0.5, 0.5), identified_nie=(0.4, 0.4))
