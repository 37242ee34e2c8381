import json
from math import sqrt

import numpy as np
import pytest

from pimi_lab.core import ConfigError
from pimi_lab.instances import Family, GeneratorSpec, gen_maxcut, gen_sk1, generate


class TestMaxCut:
    def test_complete_graph_limit(self):
        # edge_prob pushed to ~1 gives K3 with all couplings -1
        inst, edges = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 3, 0, edge_prob=0.999999))
        assert edges == 3
        off = inst.j[~np.eye(3, dtype=bool)]
        assert np.all(off == -1.0)

    def test_structure_and_metadata(self):
        inst, edges = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 30, 5))
        assert np.array_equal(inst.j, inst.j.T)
        assert np.all(np.diag(inst.j) == 0.0)
        assert set(np.unique(inst.j)) <= {0.0, -1.0}
        assert np.all(inst.h == 0.0)
        assert inst.field_scale == pytest.approx(2.0 / sqrt(30))
        assert edges == int(-inst.j.sum() // 2)

    def test_edge_count_statistics(self):
        # n=100, p=0.5: mean 2475, sigma = sqrt(4950)/2 ~ 35.2
        _, edges = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 100, 123))
        assert abs(edges - 2475) <= 3 * 35.2

    def test_rejects_degenerate(self):
        with pytest.raises(ConfigError):
            gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 1, 0))
        with pytest.raises(ConfigError):
            GeneratorSpec(Family.MAXCUT_ER, 5, 0, edge_prob=0.0)

    def test_reproducible_bytes(self, tmp_path):
        spec = GeneratorSpec(Family.MAXCUT_ER, 12, 77)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        gen_maxcut(spec)[0].save(p1)
        gen_maxcut(spec)[0].save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seeds_differ(self):
        a, _ = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 12, 1))
        b, _ = gen_maxcut(GeneratorSpec(Family.MAXCUT_ER, 12, 2))
        assert not np.array_equal(a.j, b.j)


class TestSk1:
    def test_two_spins(self):
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 2, 3))
        assert inst.j[0, 1] in (-1.0, 1.0)

    def test_fully_connected_pm1(self):
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 25, 9))
        off = inst.j[~np.eye(25, dtype=bool)]
        assert set(np.unique(off)) == {-1.0, 1.0}
        assert np.array_equal(inst.j, inst.j.T)
        assert np.all(np.diag(inst.j) == 0.0)
        assert inst.field_scale == pytest.approx(1.0 / sqrt(25))

    def test_coupling_mean_statistics(self):
        # mean of the 45 upper-triangle +-1 couplings: sigma = 1/sqrt(45)
        inst = gen_sk1(GeneratorSpec(Family.SK_ONE, 10, 21))
        iu = np.triu_indices(10, 1)
        assert abs(inst.j[iu].mean()) <= 3.0 / sqrt(45)

    def test_rejects_small(self):
        with pytest.raises(ConfigError):
            gen_sk1(GeneratorSpec(Family.SK_ONE, 1, 0))

    def test_generate_dispatch(self):
        inst, edges = generate(GeneratorSpec(Family.SK_ONE, 6, 0))
        assert edges is None
        inst2, edges2 = generate(GeneratorSpec(Family.MAXCUT_ER, 6, 0))
        assert isinstance(edges2, int)
