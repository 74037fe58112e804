import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crisp_bank, ruspini_bank
from fuzzcor import (
    AllZeroMembership,
    FuzzyCount,
    FuzzyFrequencyTable,
    FuzzyNumber,
    FuzzyPartition,
    LengthMismatch,
    PartitionInvalid,
    build_table,
    counting_functions,
    defuzzify,
    fuzzy_count,
    joint_inclusion,
)
from fuzzcor.counting import zadeh_counts
from fuzzcor.fuzzy import inclusion_degrees
from oracles import sorted_eps_counts

eps_vectors = st.lists(st.floats(0, 1, allow_nan=False), min_size=0, max_size=20)


class TestJointInclusion:
    def test_elementwise_min(self):
        assert joint_inclusion([1, 0.3], [0.6, 1]).tolist() == [0.6, 0.3]

    def test_idempotent_and_zero(self):
        x = np.array([0.2, 0.9, 0.0])
        assert np.array_equal(joint_inclusion(x, x), x)
        assert np.array_equal(joint_inclusion(x, np.zeros(3)), np.zeros(3))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            joint_inclusion([1, 0], [1])


class TestZadeh:
    def test_two_members(self):
        assert zadeh_counts([1, 1, 0], 2) == (1.0, 1.0)

    def test_half_member(self):
        assert zadeh_counts([1, 0.5], 1) == (1.0, 0.5)
        assert zadeh_counts([1, 0.5], 0) == (1.0, 0.0)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            zadeh_counts([1, 0.5], 3)

    @given(eps_vectors)
    def test_sorted_oracle(self, eps):
        fgc, flc = counting_functions(eps)
        ofgc, oflc = sorted_eps_counts(eps)
        np.testing.assert_allclose(fgc, ofgc, atol=1e-12, rtol=0)
        np.testing.assert_allclose(flc, oflc, atol=1e-12, rtol=0)

    @given(eps_vectors)
    def test_monotone_counting_functions(self, eps):
        fgc, flc = counting_functions(eps)
        assert np.all(np.diff(fgc) <= 0)
        assert np.all(np.diff(flc) >= 0)

    @given(eps_vectors.filter(len))
    def test_flc_fgc_identity(self, eps):
        fgc, flc = counting_functions(eps)
        np.testing.assert_allclose(flc[:-1], 1 - fgc[1:], atol=1e-15)


class TestFuzzyCount:
    def test_crisp_members(self):
        c = fuzzy_count([1, 1, 0])
        assert c.memberships.tolist() == [0, 0, 1, 0]
        assert c.is_degenerate

    def test_non_normal(self):
        c = fuzzy_count([1, 0.5])
        np.testing.assert_allclose(c.memberships, [0, 0.5, 0.5])
        assert c.height == 0.5
        np.testing.assert_allclose(fuzzy_count([1, 0.5], normalize=True).memberships, [0, 1, 1])

    def test_nothing_included(self):
        assert fuzzy_count([0, 0, 0]).memberships.tolist() == [1, 0, 0, 0]

    @given(st.lists(st.sampled_from([0.0, 1.0]), max_size=20))
    def test_crisp_collapse(self, eps):
        c = fuzzy_count(eps)
        assert c.is_degenerate
        assert defuzzify(c, "max") == int(sum(eps))

    @given(eps_vectors)
    def test_unimodal(self, eps):
        m = fuzzy_count(eps).memberships
        peak = int(np.argmax(m))
        assert np.all(np.diff(m[: peak + 1]) >= 0)
        assert np.all(np.diff(m[peak:]) <= 0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FuzzyCount([0.2, 1.5])


class TestDefuzzify:
    def test_mean_and_max(self):
        c = FuzzyCount([0, 0.5, 0.5])
        assert defuzzify(c, "mean") == pytest.approx(1.5)
        assert defuzzify(c, "max") == 2

    def test_degenerate(self):
        c = FuzzyCount.crisp(7, 10)
        assert defuzzify(c, "mean") == 7
        assert defuzzify(c, "max") == 7

    def test_all_zero(self):
        with pytest.raises(AllZeroMembership):
            defuzzify(FuzzyCount([0, 0, 0]))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            defuzzify(FuzzyCount([1, 0]), "median")


def crosstab(a, b, edges_a, edges_b):
    ra = np.digitize(a, edges_a[1:-1])
    rb = np.digitize(b, edges_b[1:-1])
    out = np.zeros((len(edges_a) - 1, len(edges_b) - 1), dtype=int)
    np.add.at(out, (ra, rb), 1)
    return out


class TestBuildTable:
    def test_crisp_sample_gives_crosstab(self, rng):
        edges = [0.0, 2.0, 5.0, 7.0, 10.0]
        # stay off the shared rectangle boundaries, where both neighbours claim the point
        a = rng.uniform(0, 10, 40).round(3) + 0.0005
        b = rng.uniform(0, 10, 40).round(3) + 0.0005
        xs_a = [FuzzyNumber.crisp(v) for v in a]
        xs_b = [FuzzyNumber.crisp(v) for v in b]
        tab = build_table(xs_a, xs_b, crisp_bank(edges), crisp_bank(edges), validate=False)
        assert tab.is_degenerate
        assert np.array_equal(tab.defuzzified("max"), crosstab(a, b, edges, edges))
        assert np.array_equal(tab.defuzzified("mean"), crosstab(a, b, edges, edges))

    def test_all_in_one_granule(self):
        xs = [FuzzyNumber.crisp(0.5), FuzzyNumber.crisp(0.7)]
        g = crisp_bank([0.0, 1.0, 2.0])
        tab = build_table(xs, xs, g, g, validate=False)
        assert tab.cells[0][0].memberships.tolist() == [0, 0, 1]
        for r, c in [(0, 1), (1, 0), (1, 1)]:
            assert tab.cells[r][c].memberships.tolist() == [1, 0, 0]

    def test_fuzzy_cells_match_oracle(self, rng):
        bank = ruspini_bank([0.0, 3.0, 6.0, 9.0], width=1.0)
        xs = [FuzzyNumber(*np.sort(rng.uniform(0, 9, 4))) for _ in range(12)]
        ys = [FuzzyNumber(*np.sort(rng.uniform(0, 9, 4))) for _ in range(12)]
        tab = build_table(xs, ys, bank, bank, validate=False)
        assert not tab.is_degenerate
        for r, c in [(0, 0), (1, 2), (2, 1)]:
            eps = np.minimum(inclusion_degrees(xs, bank[r]), inclusion_degrees(ys, bank[c]))
            fgc, flc = sorted_eps_counts(eps)
            np.testing.assert_allclose(tab.cells[r][c].memberships, np.minimum(fgc, flc), atol=1e-12)

    def test_threads_are_deterministic(self, rng):
        bank = ruspini_bank([0.0, 3.0, 6.0, 9.0], width=1.0)
        xs = [FuzzyNumber(*np.sort(rng.uniform(0, 9, 4))) for _ in range(10)]
        one = build_table(xs, xs[::-1], bank, bank, validate=False)
        many = build_table(xs, xs[::-1], bank, bank, validate=False, jobs=4)
        assert np.array_equal(one.membership_array(), many.membership_array())

    def test_validation_and_lengths(self):
        bad = FuzzyPartition([FuzzyNumber.rectangular(0, 1), FuzzyNumber.rectangular(3, 4)])
        xs = [FuzzyNumber.crisp(0.5), FuzzyNumber.crisp(3.5)]
        with pytest.raises(PartitionInvalid):
            build_table(xs, xs, bad, bad)
        with pytest.raises(LengthMismatch):
            build_table(xs, xs[:1], bad, bad, validate=False)


class TestTableIO:
    def test_json_round_trip(self):
        tab = FuzzyFrequencyTable.from_array(
            [[[1, 0.5, 0], [0, 1, 0.2]], [[0, 0, 1], [1, 0, 0]]], row_labels=["a", "b"])
        d = json.loads(json.dumps(tab.to_dict()))
        assert d["format"] == "fuzzcor/1" and (d["I"], d["R"], d["C"]) == (2, 2, 2)
        back = FuzzyFrequencyTable.from_dict(d)
        assert np.array_equal(back.membership_array(), tab.membership_array())
        assert back.row_labels == ["a", "b"]

    def test_shape_checks(self):
        with pytest.raises(LengthMismatch):
            FuzzyFrequencyTable([[FuzzyCount([1, 0]), FuzzyCount([1, 0, 0])]])
        with pytest.raises(LengthMismatch):
            FuzzyFrequencyTable.from_dict({"I": 1, "R": 2, "C": 1, "cells": [[[1, 0]]]})
        with pytest.raises(LengthMismatch):
            FuzzyFrequencyTable([[FuzzyCount([1, 0])]], sample_size=3)

    def test_long_csv(self):
        tab = FuzzyFrequencyTable.from_array([[[0, 0.5, 1.0]]])
        lines = tab.to_long_csv().splitlines()
        assert lines == ["r,c,n,membership", "1,1,1,0.5", "1,1,2,1.0"]

    def test_from_crisp(self):
        tab = FuzzyFrequencyTable.from_crisp([[3, 1], [0, 2]])
        assert tab.sample_size == 6
        assert np.array_equal(tab.defuzzified("mean"), [[3, 1], [0, 2]])
        with pytest.raises(ValueError):
            FuzzyFrequencyTable.from_crisp([[1.5, 2]])
