"""Sketch construction: hashing composition, turnstile linearity,
update-cost instrumentation, and the binary file format."""

import numpy as np
import pytest

from joinsketch.errors import DataError, QueryError
from joinsketch.estimator import circ_convolve
from joinsketch.hashing import bin_eval, derive_hash_set, sign_eval
from joinsketch.sketch import (
    RelationSketch,
    SketchConfig,
    TupleUpdate,
    build_sketch,
    merge,
    tuple_bin,
    tuple_sign,
    update,
)
from joinsketch.sketchfile import load_sketch_file, save_sketch_file

from conftest import multiway_graph, two_rel_graph


def make_conv(graph, relation, m=8, l=2, seed=3):
    config = SketchConfig(m=m, l=l, seed=seed, method="conv")
    hashes = derive_hash_set(config, graph)
    return RelationSketch(relation, config, graph, hashes), hashes


class TestTupleHashing:
    def test_twice_joined_sign_is_three_factor_product(self):
        graph = multiway_graph()
        sk, hashes = make_conv(graph, relation=1, m=16, l=1, seed=11)
        t = TupleUpdate(relation=1, values={1: 7, 2: 9})
        expected = (
            sign_eval(hashes.sign_for(1, 3, 0), 7)
            * sign_eval(hashes.sign_for(1, 0, 0), 7)
            * sign_eval(hashes.sign_for(2, 4, 0), 9)
        )
        assert tuple_sign(graph, hashes, 0, t) == expected

    def test_single_attribute_sign_is_single_factor(self):
        graph = two_rel_graph()
        sk, hashes = make_conv(graph, relation=0, m=16, l=1, seed=11)
        t = TupleUpdate(relation=0, values={0: 42})
        assert tuple_sign(graph, hashes, 0, t) == sign_eval(hashes.sign_for(0, 1, 0), 42)

    def test_two_attr_bin_adds_component_hashes(self):
        graph = multiway_graph()
        sk, hashes = make_conv(graph, relation=1, m=8, l=1, seed=5)
        t = TupleUpdate(relation=1, values={1: 7, 2: 9})
        expected = (
            bin_eval(hashes.bin_for(graph.psi[1], 0), 7)
            + bin_eval(hashes.bin_for(graph.psi[2], 0), 9)
        ) % 8
        assert tuple_bin(graph, hashes, 0, t) == expected

    def test_m_one_bins_to_zero(self):
        graph = multiway_graph()
        sk, hashes = make_conv(graph, relation=1, m=1, l=1)
        t = TupleUpdate(relation=1, values={1: 7, 2: 9})
        assert tuple_bin(graph, hashes, 0, t) == 0

    def test_missing_attribute_value(self):
        graph = multiway_graph()
        sk, hashes = make_conv(graph, relation=1)
        t = TupleUpdate(relation=1, values={1: 7})
        with pytest.raises(DataError, match="misses attribute"):
            tuple_sign(graph, hashes, 0, t)


class TestUpdate:
    def test_single_tuple_grid(self):
        graph = two_rel_graph()
        sk, hashes = make_conv(graph, relation=0, m=8, l=3)
        t = TupleUpdate(relation=0, values={0: 5}, delta=1.0)
        update(sk, t)
        for rep in range(3):
            j = tuple_bin(graph, hashes, rep, t)
            s = tuple_sign(graph, hashes, rep, t)
            expected = np.zeros(8)
            expected[j] = s
            np.testing.assert_array_equal(sk.counters[rep], expected)

    def test_turnstile_cancellation(self):
        graph = two_rel_graph()
        sk, _ = make_conv(graph, relation=0, m=8, l=3)
        update(sk, TupleUpdate(0, {0: 5}, +2.0))
        update(sk, TupleUpdate(0, {0: 5}, -2.0))
        assert not sk.counters.any()

    def test_repeated_update_doubles(self):
        graph = two_rel_graph()
        sk, _ = make_conv(graph, relation=0, m=8, l=2)
        update(sk, TupleUpdate(0, {0: 5}, 1.0))
        single = sk.counters.copy()
        update(sk, TupleUpdate(0, {0: 5}, 1.0))
        np.testing.assert_array_equal(sk.counters, 2 * single)

    def test_touches_exactly_l_cells(self):
        graph = two_rel_graph()
        for m in (2**4, 2**8, 2**12, 2**18):
            sk, _ = make_conv(graph, relation=0, m=m, l=5)
            before = sk.counters.copy()
            update(sk, TupleUpdate(0, {0: 1234}, 1.0))
            assert sk.touched_cells == 5
            assert int((sk.counters != before).sum()) == 5

    def test_rejects_wrong_relation(self):
        graph = two_rel_graph()
        sk, _ = make_conv(graph, relation=0)
        with pytest.raises(DataError):
            update(sk, TupleUpdate(1, {1: 3}, 1.0))

    def test_rejects_extra_attributes(self):
        graph = two_rel_graph()
        sk, _ = make_conv(graph, relation=0)
        with pytest.raises(DataError, match="cover attributes"):
            update(sk, TupleUpdate(0, {0: 3, 1: 4}, 1.0))


class TestMergeAndLinearity:
    def _stream(self, rng, relation, attrs, n, domain=32):
        return [
            TupleUpdate(
                relation,
                {u: int(rng.integers(0, domain)) for u in attrs},
                float(rng.integers(1, 4)),
            )
            for _ in range(n)
        ]

    def test_merge_identity(self):
        graph = two_rel_graph()
        rng = np.random.default_rng(0)
        config = SketchConfig(m=8, l=2, seed=1)
        hashes = derive_hash_set(config, graph)
        stream = self._stream(rng, 0, [0], 10)
        built = build_sketch(stream, graph, hashes, config, relation=0)
        zero = RelationSketch(0, config, graph, hashes)
        merged = merge(built, zero)
        np.testing.assert_array_equal(merged.counters, built.counters)

    def test_merge_equals_concatenated_build(self):
        graph = multiway_graph()
        rng = np.random.default_rng(1)
        config = SketchConfig(m=16, l=3, seed=9)
        hashes = derive_hash_set(config, graph)
        a = self._stream(rng, 1, [1, 2], 25)
        b = self._stream(rng, 1, [1, 2], 17)
        merged = merge(
            build_sketch(a, graph, hashes, config, 1),
            build_sketch(b, graph, hashes, config, 1),
        )
        together = build_sketch(a + b, graph, hashes, config, 1)
        np.testing.assert_array_equal(merged.counters, together.counters)

    def test_merge_self_doubles(self):
        graph = two_rel_graph()
        rng = np.random.default_rng(2)
        config = SketchConfig(m=8, l=2, seed=1)
        hashes = derive_hash_set(config, graph)
        sk = build_sketch(self._stream(rng, 0, [0], 12), graph, hashes, config, 0)
        doubled = merge(sk, sk)
        np.testing.assert_array_equal(doubled.counters, 2 * sk.counters)

    def test_merge_rejects_config_mismatch(self):
        graph = two_rel_graph()
        c1 = SketchConfig(m=8, l=2, seed=1)
        c2 = SketchConfig(m=8, l=2, seed=2)
        a = RelationSketch(0, c1, graph, derive_hash_set(c1, graph))
        b = RelationSketch(0, c2, graph, derive_hash_set(c2, graph))
        with pytest.raises(QueryError):
            merge(a, b)

    def test_merge_rejects_relation_mismatch(self):
        graph = two_rel_graph()
        c = SketchConfig(m=8, l=2, seed=1)
        hashes = derive_hash_set(c, graph)
        with pytest.raises(QueryError):
            merge(RelationSketch(0, c, graph, hashes), RelationSketch(1, c, graph, hashes))

    def test_order_invariance(self):
        graph = multiway_graph()
        rng = np.random.default_rng(3)
        config = SketchConfig(m=8, l=2, seed=4)
        hashes = derive_hash_set(config, graph)
        stream = self._stream(rng, 1, [1, 2], 30)
        shuffled = list(stream)
        rng.shuffle(shuffled)
        a = build_sketch(stream, graph, hashes, config, 1)
        b = build_sketch(shuffled, graph, hashes, config, 1)
        np.testing.assert_array_equal(a.counters, b.counters)

    def test_empty_stream_zero_grid(self):
        graph = two_rel_graph()
        config = SketchConfig(m=8, l=2, seed=4)
        hashes = derive_hash_set(config, graph)
        sk = build_sketch([], graph, hashes, config, 0)
        assert not sk.counters.any()

    def test_bulk_matches_scalar_updates(self):
        graph = multiway_graph()
        rng = np.random.default_rng(4)
        config = SketchConfig(m=16, l=3, seed=7)
        hashes = derive_hash_set(config, graph)
        stream = self._stream(rng, 1, [1, 2], 40)
        bulk = build_sketch(stream, graph, hashes, config, 1)
        scalar = RelationSketch(1, config, graph, hashes)
        for t in stream:
            update(scalar, t)
        np.testing.assert_array_equal(bulk.counters, scalar.counters)


class TestDirectSumOracle:
    def test_m_one_counter_is_signed_frequency_sum(self):
        # With one bin, every repetition's counter must equal the
        # frequency-weighted sum of tuple signs.
        graph = multiway_graph()
        rng = np.random.default_rng(5)
        config = SketchConfig(m=1, l=3, seed=13)
        hashes = derive_hash_set(config, graph)
        stream = [
            TupleUpdate(1, {1: int(rng.integers(0, 6)), 2: int(rng.integers(0, 6))}, float(d))
            for d in rng.integers(1, 5, size=10)
        ]
        sk = build_sketch(stream, graph, hashes, config, 1)
        for rep in range(3):
            expected = sum(tuple_sign(graph, hashes, rep, t) * t.delta for t in stream)
            assert sk.counters[rep, 0] == expected

    def test_single_tuple_sketch_is_attr_sketch_convolution(self):
        # The tuple encoding equals the circular convolution of the
        # per-attribute single-item Count sketches.
        graph = multiway_graph()
        for m in (4, 16, 64):
            config = SketchConfig(m=m, l=1, seed=21)
            hashes = derive_hash_set(config, graph)
            t = TupleUpdate(1, {1: 123, 2: 456}, 1.0)
            sk = RelationSketch(1, config, graph, hashes)
            update(sk, t)

            attr1 = np.zeros(m)
            s1 = sign_eval(hashes.sign_for(1, 0, 0), 123) * sign_eval(
                hashes.sign_for(1, 3, 0), 123
            )
            attr1[bin_eval(hashes.bin_for(graph.psi[1], 0), 123)] = s1
            attr2 = np.zeros(m)
            s2 = sign_eval(hashes.sign_for(2, 4, 0), 456)
            attr2[bin_eval(hashes.bin_for(graph.psi[2], 0), 456)] = s2

            np.testing.assert_allclose(
                sk.counters[0], circ_convolve(attr1, attr2), atol=1e-9
            )


class TestConfigValidation:
    def test_bad_m(self):
        with pytest.raises(QueryError):
            SketchConfig(m=0, l=1)

    def test_bad_l(self):
        with pytest.raises(QueryError):
            SketchConfig(m=4, l=0)

    def test_bad_method(self):
        with pytest.raises(QueryError):
            SketchConfig(m=4, l=1, method="magic")


class TestSketchFile:
    def test_round_trip_bit_exact(self, tmp_path):
        graph = multiway_graph()
        rng = np.random.default_rng(6)
        config = SketchConfig(m=8, l=5, seed=123456789, method="conv")
        hashes = derive_hash_set(config, graph)
        relations = []
        for rel in range(graph.r):
            sk = RelationSketch(rel, config, graph, hashes)
            sk.counters = rng.normal(size=(5, 8))
            relations.append((graph.spec.relations[rel].name, sk.counters))
        path = str(tmp_path / "x.jsk")
        save_sketch_file(path, config, relations)
        loaded_config, loaded = load_sketch_file(path)
        assert loaded_config == config
        assert [name for name, _ in loaded] == [name for name, _ in relations]
        for (_, a), (_, b) in zip(relations, loaded):
            assert a.tobytes() == b.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.jsk"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(DataError, match="magic"):
            load_sketch_file(str(path))

    def test_truncated(self, tmp_path):
        graph = two_rel_graph()
        config = SketchConfig(m=4, l=1, seed=0)
        relations = [("A", np.zeros((1, 4))), ("B", np.zeros((1, 4)))]
        path = str(tmp_path / "t.jsk")
        save_sketch_file(path, config, relations)
        data = open(path, "rb").read()
        open(path, "wb").write(data[:-5])
        with pytest.raises(DataError, match="truncated"):
            load_sketch_file(path)

    def test_ams_tag_round_trip(self, tmp_path):
        config = SketchConfig(m=4, l=2, seed=9, method="ams")
        relations = [("A", np.ones((2, 4))), ("B", np.ones((2, 4)))]
        path = str(tmp_path / "a.jsk")
        save_sketch_file(path, config, relations)
        loaded_config, _ = load_sketch_file(path)
        assert loaded_config.method == "ams"
