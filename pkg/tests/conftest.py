"""
pytest configuration and shared fixtures
"""

import os
from typing import Dict, List, Tuple

import pytest

from fpp_lab.lattice import Box, LatticeEdge, canonical_edge, neighbors
from fpp_lab.weights import DistributionSpec, WeightField

# Keep worker count deterministic regardless of the developer's shell
os.environ['FPP_LAB_THREADS'] = '1'


@pytest.fixture
def unit_field():
    """tau = 1 on every edge of Z^2"""
    return WeightField(seed=1, spec=DistributionSpec.deterministic(1.0), dimension=2)


@pytest.fixture
def uniform_field():
    """Seeded Uniform(0,1) field on Z^2"""
    return WeightField(seed=20250115, spec=DistributionSpec.uniform(), dimension=2)


@pytest.fixture
def exponential_field():
    """Seeded Exponential(1) field on Z^2"""
    return WeightField(seed=424242, spec=DistributionSpec.exponential(1.0), dimension=2)


@pytest.fixture
def bernoulli_field():
    """Seeded Bernoulli field with a zero atom of mass 0.7 (supercritical zeros)"""
    return WeightField(seed=99, spec=DistributionSpec.bernoulli(0.7), dimension=2)


@pytest.fixture
def window5():
    """5x5 window centred at the origin"""
    return Box((0, 0), 2)


@pytest.fixture
def saw_oracle():
    """Exhaustive self-avoiding path enumeration on a small window.

    Returns a function (field, window, y, z) -> (best weight, set of optimal
    edge sequences).
    """
    def _enumerate(field, window: Box, y, z):
        best = [float('inf')]
        optimal: List[Tuple[LatticeEdge, ...]] = []
        weights: Dict[LatticeEdge, float] = {}

        def w(edge):
            if edge not in weights:
                weights[edge] = field.weight(edge)
            return weights[edge]

        def walk(p, visited, edges, total):
            if total > best[0]:
                return
            if p == z:
                if total < best[0]:
                    best[0] = total
                    optimal.clear()
                optimal.append(tuple(edges))
                return
            for edge, q in neighbors(p):
                if q in visited or not window.contains(q):
                    continue
                visited.add(q)
                edges.append(edge)
                walk(q, visited, edges, total + w(edge))
                edges.pop()
                visited.remove(q)

        walk(y, {y}, [], 0.0)
        return best[0], {path for path in optimal}

    return _enumerate


@pytest.fixture
def edge_between():
    """Canonical edge constructor shortcut"""
    return canonical_edge
