import itertools
import sys

import numpy as np
import pytest

from gappart.baselines import (ExternalPartitioner, OracleTooLarge, brute_force_min_ncut,
                               random_partition, spectral_partition)
from gappart.graph import Graph, generate_clique_chain, generate_erdos_renyi
from gappart.loss import exact_ncut
from gappart.metrics import edge_cut_ratio

from conftest import random_graph


def _naive_min_ncut(g, gp):
    best = np.inf
    for a in itertools.product(range(gp), repeat=g.n):
        if len(set(a)) == gp:
            best = min(best, exact_ncut(g, a, gp))
    return best


def test_oracle_examples(c4, two_triangles):
    assert brute_force_min_ncut(c4, 2).ncut == 1.0
    res = brute_force_min_ncut(two_triangles, 2)
    assert res.ncut == pytest.approx(2 / 7) and round(res.ncut, 4) == 0.2857
    assert sorted(res.assignment[:3]) == [res.assignment[0]] * 3
    assert res.assignment[0] != res.assignment[3]


def test_oracle_enumeration_counts(k4):
    # Stirling numbers S(n, g): one labelling per set partition
    assert brute_force_min_ncut(k4, 2).enumerated == 7
    assert brute_force_min_ncut(Graph.from_edges(5, [(0, 1)]), 3).enumerated == 25


@pytest.mark.parametrize("seed", range(6))
def test_oracle_matches_naive_product(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 7, 0.5, weighted=bool(seed % 2))
    for gp in (2, 3):
        assert brute_force_min_ncut(g, gp).ncut == pytest.approx(_naive_min_ncut(g, gp), abs=1e-12)


def test_oracle_balanced_constraint():
    g = generate_clique_chain([2, 6])
    res = brute_force_min_ncut(g, 2, require_balanced=True)
    assert sorted(np.bincount(res.assignment)) == [4, 4]
    assert res.ncut >= brute_force_min_ncut(g, 2).ncut


def test_oracle_guards():
    with pytest.raises(OracleTooLarge):
        brute_force_min_ncut(generate_erdos_renyi(17, 0.3, 0), 2)
    with pytest.raises(OracleTooLarge):
        brute_force_min_ncut(generate_erdos_renyi(11, 0.3, 0), 3)
    with pytest.raises(OracleTooLarge):
        brute_force_min_ncut(generate_erdos_renyi(5, 0.3, 0), 4)
    with pytest.raises(ValueError):
        brute_force_min_ncut(Graph.from_edges(2, [(0, 1)]), 3)


def test_spectral_path_and_bridge(p4, two_triangles):
    assert spectral_partition(p4, 2).tolist() == [0, 0, 1, 1]
    a = spectral_partition(two_triangles, 2)
    assert exact_ncut(two_triangles, a) == pytest.approx(2 / 7)


def test_spectral_disconnected_components():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    a = spectral_partition(g, 2)
    assert edge_cut_ratio(g, a) == 0 and len(set(a)) == 2


def test_spectral_validation():
    with pytest.raises(ValueError):
        spectral_partition(Graph.from_edges(2, [(0, 1)]), 3)


def test_random_partition_cut_mean():
    g = generate_erdos_renyi(200, 0.05, 0)
    for gp in (2, 3, 4):
        cuts = [edge_cut_ratio(g, random_partition(g.n, gp, s)) for s in range(100)]
        assert abs(np.mean(cuts) - (gp - 1) / gp) <= 0.02
    assert np.array_equal(random_partition(10, 3, 1), random_partition(10, 3, 1))


def test_external_partitioner_stdout_and_file(two_triangles):
    script = ("import sys; lines=open(sys.argv[1]).read().split(chr(10)); "
              "n=int(lines[0].split()[0]); print(chr(10).join(str(i*2//n) for i in range(n)))")
    ext = ExternalPartitioner(f"{sys.executable} -c '{script}' {{graph}}", name="halves")
    assert ext(two_triangles, 2).tolist() == [0, 0, 0, 1, 1, 1]
    ext2 = ExternalPartitioner(f"{sys.executable} -c '{script}' {{graph}} > {{out}}")
    assert ext2(two_triangles, 2).tolist() == [0, 0, 0, 1, 1, 1]


def test_external_partitioner_errors(c4):
    with pytest.raises(ValueError):
        ExternalPartitioner("echo no placeholder")
    with pytest.raises(RuntimeError, match="returned 1 ids"):
        ExternalPartitioner("echo 0 # {graph}")(c4, 2)
    with pytest.raises(RuntimeError, match="outside"):
        ExternalPartitioner("echo 0 1 2 5 # {graph}")(c4, 2)
    with pytest.raises(RuntimeError, match="exited"):
        ExternalPartitioner("false {graph}")(c4, 2)
