from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockbox.chain import InvalidParameterError
from blockbox.topology import TopologySpec, average_shortest_path, generate, validate


def bfs_average(spec):
    # independent all-pairs BFS oracle
    adj = spec.neighbors()
    total = pairs = 0
    for src in range(spec.n):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        for dst in range(src + 1, spec.n):
            total += dist[dst]
            pairs += 1
    return Fraction(total, pairs)


class TestGenerate:
    def test_ring_9(self):
        spec = generate("ring", 9)
        assert len(spec.edges) == 9
        assert all(len(peers) == 2 for peers in spec.neighbors().values())

    def test_star_2(self):
        spec = generate("star", 2)
        assert spec.edges == ((0, 1),)
        degrees = {i: len(p) for i, p in spec.neighbors().items()}
        assert degrees == {0: 1, 1: 1}

    def test_star_hub_override(self):
        spec = generate("star", 5, hub=2)
        assert len(spec.neighbors()[2]) == 4

    def test_grid_3x3(self):
        spec = generate("grid", 9)
        assert len(spec.edges) == 12
        degrees = sorted(len(p) for p in spec.neighbors().values())
        # 4 corners of degree 2, 4 edge nodes of degree 3, 1 center of degree 4
        assert degrees == [2, 2, 2, 2, 3, 3, 3, 3, 4]

    def test_grid_rect(self):
        spec = generate("grid", 6, rows=2, cols=3)
        assert len(spec.edges) == 7

    def test_incompatible_n(self):
        with pytest.raises(InvalidParameterError):
            generate("ring", 2)
        with pytest.raises(InvalidParameterError):
            generate("grid", 10)
        with pytest.raises(InvalidParameterError):
            generate("star", 1)

    def test_custom(self):
        spec = generate("custom", 3, edges=[(0, 1), (1, 2)])
        assert validate(spec) == []


class TestValidate:
    def test_generated_ring_clean(self):
        assert validate(generate("ring", 9)) == []

    def test_self_loop(self):
        spec = generate("custom", 3, edges=[(0, 1), (1, 2), (2, 2)])
        assert any("self-loop" in v for v in validate(spec))

    def test_disconnected(self):
        spec = generate("custom", 9, edges=[(0, 1), (1, 2), (3, 4), (4, 5), (6, 7), (7, 8)])
        assert any("disconnected" in v for v in validate(spec))

    def test_duplicate_edge(self):
        spec = TopologySpec("custom", 3, ((0, 1), (0, 1), (1, 2)))
        assert any("duplicate" in v for v in validate(spec))

    def test_out_of_range(self):
        spec = TopologySpec("custom", 3, ((0, 5),))
        assert any("outside" in v for v in validate(spec))

    def test_wrong_ring_shape(self):
        spec = TopologySpec("ring", 4, ((0, 1), (1, 2), (2, 3), (3, 0), (0, 2)))
        assert any("degree 2" in v for v in validate(spec))


class TestAverageShortestPath:
    def test_ring_3_is_complete_triangle(self):
        assert average_shortest_path(generate("ring", 3)) == 1

    def test_star_9(self):
        # oracle: 8 hub-leaf pairs at distance 1, C(8,2)=28 leaf pairs at 2
        spec = generate("star", 9)
        assert bfs_average(spec) == Fraction(8 * 1 + 28 * 2, 36) == Fraction(16, 9)
        assert average_shortest_path(spec) == Fraction(16, 9)

    def test_ring_9(self):
        spec = generate("ring", 9)
        assert average_shortest_path(spec) == bfs_average(spec) == Fraction(5, 2)

    def test_grid_9(self):
        spec = generate("grid", 9)
        assert average_shortest_path(spec) == bfs_average(spec) == 2

    def test_paper_ordering_for_9_nodes(self):
        star = average_shortest_path(generate("star", 9))
        grid = average_shortest_path(generate("grid", 9))
        ring = average_shortest_path(generate("ring", 9))
        assert star < grid < ring

    def test_disconnected_rejected(self):
        spec = generate("custom", 4, edges=[(0, 1), (2, 3)])
        with pytest.raises(InvalidParameterError):
            average_shortest_path(spec)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["ring", "star", "grid"]),
    st.integers(2, 36),
)
def test_generate_then_validate_clean(kind, n):
    if kind == "ring" and n < 3:
        n = 3
    if kind == "grid":
        side = int(n**0.5)
        n = max(side, 1) ** 2
        if n < 1:
            return
    spec = generate(kind, n)
    assert validate(spec) == []
    assert average_shortest_path(spec) == bfs_average(spec) if n > 1 else True


def test_roundtrip_dict():
    for spec in (generate("ring", 5), generate("star", 4, hub=1), generate("grid", 6, rows=2, cols=3),
                 generate("custom", 3, edges=[(0, 1), (1, 2)])):
        assert TopologySpec.from_dict(spec.to_dict()) == spec
