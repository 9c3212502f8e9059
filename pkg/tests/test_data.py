import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialid.data import (Interval, StratifiedCounts, Stratum, ThreeVarCounts,
                            TwoArmCounts, empirical_law, load_counts,
                            serialize_counts)
from partialid.errors import ValidationError

AZT_JSON = {"design": "two_arm",
            "counts": {"z1": {"y1": 500, "y0": 900}, "z0": {"y1": 500, "y0": 100}}}

PERTUSSIS_JSON = {"design": "three_var", "outcome_defined_when_s0": False,
                  "counts": {"z1": {"s1": {"y1": 176, "y0": 372}, "s0": 3297},
                             "z0": {"s1": {"y1": 129, "y0": 77}, "s0": 814}}}


def write_json(tmp_path, obj, name="input.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


class TestLoadCounts:
    def test_azt_json(self, tmp_path):
        counts = load_counts(write_json(tmp_path, AZT_JSON))
        assert isinstance(counts, TwoArmCounts)
        assert counts.arm_total(1) == 1400
        assert counts.arm_total(0) == 600
        assert counts.total == 2000

    def test_negative_count_rejected(self, tmp_path):
        bad = {"design": "two_arm",
               "counts": {"z1": {"y1": -1, "y0": 900}, "z0": {"y1": 500, "y0": 100}}}
        with pytest.raises(ValidationError, match="y1"):
            load_counts(write_json(tmp_path, bad))

    def test_pertussis_json(self, tmp_path):
        counts = load_counts(write_json(tmp_path, PERTUSSIS_JSON))
        assert isinstance(counts, ThreeVarCounts)
        assert not counts.outcome_defined_when_s0
        assert counts.arm_total(1) == 3845
        assert counts.arm_total(0) == 1020
        assert counts.n_s1_total(1) == 548
        assert counts.n_s1_total(0) == 206
        assert counts.n(1, 1, 1) == 176
        assert counts.n(1, 1, 0) == 129

    def test_merged_cell_access_guarded(self, tmp_path):
        counts = load_counts(write_json(tmp_path, PERTUSSIS_JSON))
        with pytest.raises(ValidationError, match="undefined"):
            counts.n(0, 0, 1)
        assert counts.n_s0_total(1) == 3297

    def test_zero_arm_rejected(self, tmp_path):
        bad = {"design": "two_arm",
               "counts": {"z1": {"y1": 0, "y0": 0}, "z0": {"y1": 500, "y0": 100}}}
        with pytest.raises(ValidationError, match="zero total"):
            load_counts(write_json(tmp_path, bad))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValidationError, match="malformed"):
            load_counts(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_counts(tmp_path / "nope.json")

    def test_stratified_json(self, tmp_path):
        obj = {"design": "stratified",
               "counts": {"strata": [
                   {"label": "young", "weight": 0.25, "design": "two_arm",
                    "counts": {"z1": {"y1": 5, "y0": 5}, "z0": {"y1": 2, "y0": 8}}},
                   {"label": "old", "weight": 0.75, "design": "two_arm",
                    "counts": {"z1": {"y1": 9, "y0": 1}, "z0": {"y1": 4, "y0": 6}}},
               ]}}
        sc = load_counts(write_json(tmp_path, obj))
        assert isinstance(sc, StratifiedCounts)
        assert [s.label for s in sc.strata] == ["young", "old"]

    def test_stratified_weights_must_sum_to_one(self):
        arm = TwoArmCounts(1, 1, 1, 1)
        with pytest.raises(ValidationError, match="sum"):
            StratifiedCounts(strata=(Stratum("a", 0.3, arm), Stratum("b", 0.3, arm)))


class TestCsv:
    def test_two_arm_csv(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("y,z,count\n1,1,500\n0,1,900\n1,0,500\n0,0,100\n")
        counts = load_counts(path, format="csv")
        assert counts == TwoArmCounts(500, 900, 500, 100)

    def test_three_var_csv_with_merged_cells(self, tmp_path):
        path = tmp_path / "three.csv"
        path.write_text("y,s,z,count\n"
                        "1,1,1,176\n0,1,1,372\n,0,1,3297\n"
                        "1,1,0,129\n0,1,0,77\n,0,0,814\n")
        counts = load_counts(path, format="csv")
        assert not counts.outcome_defined_when_s0
        assert counts.arm_total(1) == 3845

    def test_full_three_var_csv(self, tmp_path):
        path = tmp_path / "full.csv"
        rows = ["y,s,z,count"]
        for y in (0, 1):
            for s in (0, 1):
                for z in (0, 1):
                    rows.append(f"{y},{s},{z},{y + 2 * s + 4 * z + 1}")
        path.write_text("\n".join(rows) + "\n")
        counts = load_counts(path, format="csv")
        assert counts.outcome_defined_when_s0
        assert counts.n(1, 0, 1) == 1 + 4 + 1


class TestRoundTrip:
    def test_json_round_trip_two_arm(self, tmp_path):
        counts = load_counts(write_json(tmp_path, AZT_JSON))
        assert serialize_counts(counts) == AZT_JSON

    def test_json_round_trip_three_var(self, tmp_path):
        counts = load_counts(write_json(tmp_path, PERTUSSIS_JSON))
        again = load_counts(write_json(tmp_path, serialize_counts(counts), "again.json"))
        assert again == counts

    def test_json_round_trip_stratified(self, tmp_path):
        obj = {"design": "stratified",
               "counts": {"strata": [
                   {"label": "young", "weight": 0.25, "design": "two_arm",
                    "counts": {"z1": {"y1": 5, "y0": 5}, "z0": {"y1": 2, "y0": 8}}},
                   {"label": "old", "weight": 0.75, "design": "two_arm",
                    "counts": {"z1": {"y1": 9, "y0": 1}, "z0": {"y1": 4, "y0": 6}}},
               ]}}
        sc = load_counts(write_json(tmp_path, obj))
        again = load_counts(write_json(tmp_path, serialize_counts(sc), "again.json"))
        assert again == sc

    @given(st.lists(st.integers(min_value=0, max_value=10 ** 6),
                    min_size=8, max_size=8))
    def test_three_var_serialize_inverts(self, cells):
        n_s1 = ((cells[0], cells[1]), (cells[2], cells[3]))
        n_s0 = ((cells[4], cells[5]), (cells[6], cells[7]))
        try:
            counts = ThreeVarCounts(n_s1=n_s1, n_s0=n_s0)
        except ValidationError:
            return  # a zero arm; nothing to round-trip
        blob = json.dumps(serialize_counts(counts))
        from partialid.data import _from_json_obj
        assert _from_json_obj(json.loads(blob)) == counts


class TestEmpiricalLaw:
    def test_cholestyramine_proportions(self, cholestyramine):
        law = empirical_law(cholestyramine)
        assert law.cell(0, 0, 0) == pytest.approx(0.919, abs=1e-12)
        assert law.cell(1, 1, 1) == pytest.approx(0.473, abs=1e-12)
        assert law.n == 2000

    def test_rational_mode_is_exact(self, cholestyramine):
        law = empirical_law(cholestyramine, rational=True)
        assert law.cell(0, 0, 0) == Fraction(919, 1000)
        assert law.cell(1, 1, 1) == Fraction(473, 1000)

    def test_point_mass(self):
        counts = ThreeVarCounts(n_s1=((0, 0), (0, 7)), n_s0=((3, 0), (0, 0)))
        law = empirical_law(counts)
        assert law.cell(1, 1, 1) == 1.0
        assert law.cell(0, 0, 0) == 1.0

    @given(st.lists(st.integers(min_value=0, max_value=10 ** 4),
                    min_size=8, max_size=8))
    @settings(max_examples=200)
    def test_cells_sum_to_one_per_arm(self, cells):
        n_s1 = ((cells[0], cells[1]), (cells[2], cells[3]))
        n_s0 = ((cells[4], cells[5]), (cells[6], cells[7]))
        try:
            counts = ThreeVarCounts(n_s1=n_s1, n_s0=n_s0)
        except ValidationError:
            return
        law = empirical_law(counts, rational=True)
        for z in (0, 1):
            assert sum(law.cell(y, s, z) for y in (0, 1) for s in (0, 1)) == 1
        assert law.pz[0] + law.pz[1] == 1


class TestInterval:
    def test_ordering_enforced(self):
        with pytest.raises(ValidationError):
            Interval(1.0, 0.0)

    def test_intersect(self):
        assert Interval(0, 2).intersect(Interval(1, 3)) == Interval(1, 2)
        assert Interval(0, 1).intersect(Interval(2, 3)) is None

    def test_width_and_contains(self):
        iv = Interval(Fraction(-7, 10), Fraction(3, 10))
        assert iv.width == 1
        assert iv.contains(0)
        assert not iv.contains(0.5)
