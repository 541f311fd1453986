"""Tests for random substreams and the chunked worker pool."""

import numpy as np
import pytest

from vip_sim.core.parallel import chunk_sizes, map_ordered
from vip_sim.core.rng import MAX_SEED, stage_key, substream
from vip_sim.errors import DomainError


def _square(x: int) -> int:
    return x * x


class TestSubstream:
    def test_same_key_same_stream(self):
        """The same (seed, stage, index) always yields the same draws."""
        a = substream(42, "transport", 3).random(5)
        b = substream(42, "transport", 3).random(5)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("other", [(43, "transport", 3), (42, "frames", 3), (42, "transport", 4)])
    def test_different_key_different_stream(self, other):
        """Changing any part of the key changes the stream."""
        a = substream(42, "transport", 3).random(5)
        b = substream(*other).random(5)
        assert not np.array_equal(a, b)

    def test_stage_key_is_stable(self):
        """Stage keys do not depend on the per-process hash salt."""
        assert stage_key("transport") == stage_key("transport")
        assert 0 <= stage_key("frames") < 2**32

    def test_full_seed_range(self):
        """Every unsigned 64-bit seed is accepted."""
        substream(0, "x")
        substream(MAX_SEED, "x")

    @pytest.mark.parametrize("seed", [-1, MAX_SEED + 1])
    def test_seed_out_of_range(self, seed):
        """Seeds outside the u64 range are rejected."""
        with pytest.raises(DomainError):
            substream(seed, "x")

    def test_negative_index(self):
        """Substream indices are non-negative."""
        with pytest.raises(DomainError):
            substream(1, "x", -1)


class TestChunkSizes:
    def test_exact_multiple(self):
        assert chunk_sizes(300, 100) == [100, 100, 100]

    def test_remainder_chunk(self):
        """The last chunk holds the remainder."""
        assert chunk_sizes(250, 100) == [100, 100, 50]

    def test_empty(self):
        assert chunk_sizes(0, 100) == []

    def test_prefix_stable(self):
        """A larger total keeps the chunk boundaries of a smaller one."""
        assert chunk_sizes(400, 100)[:2] == chunk_sizes(200, 100)


class TestMapOrdered:
    def test_inline(self):
        """One worker runs the tasks in order in-process."""
        assert map_ordered(_square, [1, 2, 3], workers=1) == [1, 4, 9]

    def test_pool_preserves_order(self):
        """A process pool returns results in task order."""
        tasks = list(range(10))
        assert map_ordered(_square, tasks, workers=2) == [t * t for t in tasks]

    def test_no_tasks(self):
        assert map_ordered(_square, [], workers=4) == []
