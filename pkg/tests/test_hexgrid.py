from terranova.hexgrid import disc_offsets, grid_for, hex_distance
from terranova.rng import RandomStream


def test_disc_sizes_match_hex_arithmetic():
    # |disc(r)| = 1 + 3 r (r+1)
    assert len(disc_offsets(1)) == 7
    assert len(disc_offsets(2)) == 19
    assert len(disc_offsets(3)) == 37


def test_disc_order_is_canonical_and_center_first():
    offs = disc_offsets(3)
    assert offs[0] == (0, 0)
    assert offs == sorted(offs, key=lambda o: (max(abs(o[0]), abs(o[1]),
                                                   abs(o[0] + o[1])), o))


def test_neighbors_are_reciprocal_and_distance_one():
    g = grid_for(12, 10)
    for t in range(g.n_tiles):
        for nb in g.neighbors_of(t):
            assert t in g.neighbors_of(nb)
            assert g.distance(t, nb) == 1


def test_distance_symmetry_and_triangle():
    g = grid_for(16, 12)
    s = RandomStream.from_seed(1, "hex")
    for _ in range(200):
        a, b, c = (s.randrange(g.n_tiles) for _ in range(3))
        assert g.distance(a, b) == g.distance(b, a)
        assert g.distance(a, c) <= g.distance(a, b) + g.distance(b, c)


def test_line_endpoints_and_contiguity():
    g = grid_for(20, 14)
    s = RandomStream.from_seed(2, "line")
    for _ in range(100):
        a, b = s.randrange(g.n_tiles), s.randrange(g.n_tiles)
        line = g.line(a, b)
        assert line[0] == a and line[-1] == b
        for x, y in zip(line, line[1:]):
            assert g.distance(x, y) == 1
        assert len(line) == g.distance(a, b) + 1


def test_disc_slots_align_with_disc():
    g = grid_for(10, 10)
    center = 5 * 10 + 5
    slots = g.disc_slots(center, 3)
    assert len(slots) == 37
    assert slots[0] == center
    assert [t for t in slots if t >= 0] == g.disc(center, 3)


def test_offset_distance_examples():
    # Hand-checked odd-row offset pairs.
    assert hex_distance(0, 0, 0, 0) == 0
    assert hex_distance(0, 0, 3, 0) == 3
    assert hex_distance(2, 2, 2, 4) == 2
    assert hex_distance(0, 0, 0, 1) == 1
