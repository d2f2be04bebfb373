import pytest
from hypothesis import given, settings, strategies as st

from cgrminer.errors import SnapshotUnavailable
from cgrminer.history import Commit, StraightSequence, build_graph, extract_straight_sequences
from cgrminer.squash import SquashUnit, Strategy, extract_units, squash, units_at_level

from corpus import random_graph_commits
from oracle import window_count

SEQ = StraightSequence(("c0", "c1", "c2", "c3", "c4"))


def commits_of(units):
    return [list(u.commits) for u in units]


def chain(n):
    return build_graph([Commit(f"c{i}", (f"c{i - 1}",) if i else ()) for i in range(n)])


def test_offset_zero_discards_remainder():
    assert commits_of(extract_units(SEQ, Strategy(2, 0))) == [["c0", "c1"], ["c2", "c3"]]


def test_offset_one():
    assert commits_of(extract_units(SEQ, Strategy(2, 1))) == [["c1", "c2"], ["c3", "c4"]]


def test_too_short_sequence():
    assert extract_units(StraightSequence(("c0", "c1")), Strategy(3, 0)) == []


def test_level_one_is_one_unit_per_commit():
    assert commits_of(extract_units(SEQ, Strategy(1, 0))) == [[c] for c in SEQ.commits]


@pytest.mark.parametrize("level, offset", [(0, 0), (2, 2), (3, -1)])
def test_strategy_bounds(level, offset):
    with pytest.raises(ValueError):
        Strategy(level, offset)


def test_unit_size_must_match_level():
    with pytest.raises(ValueError):
        SquashUnit(("a",), Strategy(2, 0), "a")


def test_union_over_offsets_on_four_chain():
    units = units_at_level(chain(4), 2)
    assert commits_of(units) == [["c0", "c1"], ["c1", "c2"], ["c2", "c3"]]
    assert [u.strategy.offset for u in units] == [0, 1, 0]


def test_empty_graph_has_no_units():
    assert units_at_level(build_graph([]), 2) == []


def test_squash_snapshot_refs():
    g = chain(4)
    root_unit, inner_unit = units_at_level(g, 2)[:2]
    assert (squash(root_unit, g).before_snapshot_ref, squash(root_unit, g).after_snapshot_ref) == (None, "c1")
    assert (squash(inner_unit, g).before_snapshot_ref, squash(inner_unit, g).after_snapshot_ref) == ("c0", "c2")
    single = units_at_level(g, 1)[2]
    assert (squash(single, g).before_snapshot_ref, squash(single, g).after_snapshot_ref) == ("c1", "c2")


def test_squash_unknown_commit():
    with pytest.raises(SnapshotUnavailable):
        squash(SquashUnit(("zz",), Strategy(1), "zz"), chain(2))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 5))
def test_window_partition_law(seed, level):
    g = build_graph(random_graph_commits(seed))
    for seq in extract_straight_sequences(g):
        for offset in range(level):
            units = extract_units(seq, Strategy(level, offset))
            flat = [c for u in units for c in u.commits]
            assert flat == list(seq.commits[offset:offset + len(flat)])
            assert all(len(u.commits) == level for u in units)
            assert len(units) == max(0, (len(seq) - offset) // level)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 5))
def test_unit_count_formula(seed, level):
    g = build_graph(random_graph_commits(seed))
    lengths = [len(s) for s in extract_straight_sequences(g)]
    assert len(units_at_level(g, level)) == window_count(lengths, level)
