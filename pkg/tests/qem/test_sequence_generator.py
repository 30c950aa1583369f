import numpy as np
import pytest

from qem.utils.sequence_generator import SequenceGenerator


def test_bulirsch_stoer():
    assert SequenceGenerator.bulirsch_stoer(3) == [1.0, 2.0, 4.0, 8.0]
    with pytest.raises(ValueError):
        SequenceGenerator.bulirsch_stoer(2, base=1.0)


def test_harmonic():
    assert SequenceGenerator.harmonic(3) == [1.0, 2.0, 3.0, 4.0]
    assert SequenceGenerator.harmonic(2, eta=2.0, q=2.0) == pytest.approx([1.0, 2.25, 4.0])
    with pytest.raises(ValueError):
        SequenceGenerator.harmonic(2, eta=0.0)


def test_random_partition_bounds_and_spacing():
    nodes = SequenceGenerator.random_partition(3, np.random.default_rng(3), c_max=4.0, min_separation=0.05)
    assert len(nodes) == 4
    assert nodes[0] == 1.0
    assert all(1.0 < c <= 4.0 for c in nodes[1:])
    assert SequenceGenerator.min_gap(nodes) >= 0.05


def test_random_partition_is_deterministic():
    a = SequenceGenerator.random_partition(3, np.random.default_rng(5))
    b = SequenceGenerator.random_partition(3, np.random.default_rng(5))
    assert a == b


def test_random_partition_gives_up():
    with pytest.raises(ValueError):
        SequenceGenerator.random_partition(5, np.random.default_rng(0), c_max=1.1, min_separation=0.05, max_resamples=3)
