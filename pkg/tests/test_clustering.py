"""Tests for cluster finding, classification and calibration."""

import numpy as np
import pytest

from vip_sim.ccd.clustering import (
    Cluster,
    ClusterClass,
    calibrate,
    classify_cluster,
    find_clusters,
    measure_corpus,
    reconstruct_energies,
)
from vip_sim.ccd.frames import CorpusSpec, Frame, synthesize_corpus, synthesize_frame
from vip_sim.errors import DomainError
from vip_sim.models import EnergyCalibration

NOISE = 10.0


def frame_with(*pixels, size=16):
    """A noiseless frame with ``(x, y, adc)`` pixels set."""
    grid = np.zeros((size, size), dtype=np.uint16)
    for x, y, adc in pixels:
        grid[y, x] = adc
    return Frame(pixels=grid)


def line_cluster(n):
    xs = np.arange(n)
    return Cluster(xs=xs, ys=np.zeros(n, dtype=int), adc=np.full(n, 300))


class TestFindClusters:
    def test_empty_frame(self):
        assert find_clusters(frame_with(), noise_sigma_adc=NOISE) == []

    def test_single_pixel(self):
        """One pixel at 100 sigma is one single-pixel cluster."""
        clusters = find_clusters(frame_with((4, 5, 1000)), noise_sigma_adc=NOISE)
        assert len(clusters) == 1
        assert clusters[0].pixel_count == 1
        assert clusters[0].pixels() == [(4, 5, 1000)]
        assert clusters[0].summed_adc == 1000

    def test_neighbour_joins_seed(self):
        """A 4-sigma pixel next to a seed joins its cluster."""
        clusters = find_clusters(frame_with((4, 5, 1000), (5, 5, 40)), noise_sigma_adc=NOISE)
        assert len(clusters) == 1
        assert clusters[0].pixel_count == 2
        assert clusters[0].summed_adc == 1040

    def test_unseeded_pixel_dropped(self):
        """A lone pixel above the neighbour threshold but below the seed threshold is noise."""
        assert find_clusters(frame_with((4, 5, 40)), noise_sigma_adc=NOISE) == []

    def test_diagonal_pixels_are_separate(self):
        """Connectivity is 4-neighbour: diagonal seeds form two clusters."""
        clusters = find_clusters(frame_with((4, 4, 1000), (5, 5, 1000)), noise_sigma_adc=NOISE)
        assert len(clusters) == 2

    def test_threshold_is_strict(self):
        """A pixel exactly at the seed threshold does not seed."""
        assert find_clusters(frame_with((3, 3, 50)), noise_sigma_adc=NOISE) == []

    def test_zero_noise_any_charge_counts(self):
        assert len(find_clusters(frame_with((3, 3, 1)), noise_sigma_adc=0.0)) == 1

    def test_every_pixel_in_one_cluster(self):
        """Clusters never share pixels."""
        frame = synthesize_frame([], NOISE, 4.0, EnergyCalibration(), np.random.default_rng(3), 64, 64)
        seen = set()
        for cluster in find_clusters(frame, noise_sigma_adc=NOISE):
            pixels = {(x, y) for x, y, _ in cluster.pixels()}
            assert not pixels & seen
            seen |= pixels

    def test_recovers_injected_hits(self):
        """Well-separated hits in a noisy frame come back one cluster each, within a pixel."""
        sites = [(5, 5), (20, 40), (50, 12), (40, 55)]
        frame = synthesize_frame(
            [(site, 8.040) for site in sites], NOISE, 0.0, EnergyCalibration(), np.random.default_rng(17), 64, 64
        )
        clusters = find_clusters(frame, noise_sigma_adc=NOISE)
        assert len(clusters) == len(sites)
        for (x, y) in sites:
            assert any(abs(c.centroid[0] - x) <= 1 and abs(c.centroid[1] - y) <= 1 for c in clusters)

    def test_neighbour_threshold_capped_at_seed(self):
        """A neighbour threshold above the seed threshold acts as the seed threshold."""
        frame = frame_with((4, 5, 1000), (5, 5, 35), (9, 9, 35))
        capped = find_clusters(frame, 3.0, 5.0, NOISE)
        assert [c.pixels() for c in capped] == [c.pixels() for c in find_clusters(frame, 3.0, 3.0, NOISE)]
        assert [c.pixel_count for c in capped] == [2, 1]

    def test_translation_moves_centroids(self):
        """Shifting a noisy frame by (dx, dy) shifts every centroid by exactly (dx, dy)."""
        sites = [(10, 10), (25, 20), (40, 33)]
        frame = synthesize_frame(
            [(site, 8.040) for site in sites], NOISE, 1.0, EnergyCalibration(), np.random.default_rng(23), 48, 48
        )
        dx, dy = 5, 3
        shifted = np.zeros((60, 60), dtype=np.uint16)
        shifted[dy : dy + 48, dx : dx + 48] = frame.pixels
        before = find_clusters(frame, noise_sigma_adc=NOISE)
        after = find_clusters(Frame(pixels=shifted), noise_sigma_adc=NOISE)
        assert len(after) == len(before) > 0
        for a, b in zip(before, after):
            assert b.pixel_count == a.pixel_count
            assert b.summed_adc == a.summed_adc
            assert b.centroid[0] == pytest.approx(a.centroid[0] + dx, abs=1e-9)
            assert b.centroid[1] == pytest.approx(a.centroid[1] + dy, abs=1e-9)

    @pytest.mark.parametrize("seed_sigma,neighbour_sigma", [(0.0, 3.0), (5.0, 0.0)])
    def test_invalid_thresholds(self, seed_sigma, neighbour_sigma):
        with pytest.raises(DomainError):
            find_clusters(frame_with(), seed_sigma, neighbour_sigma, NOISE)


class TestClassifyCluster:
    @pytest.mark.parametrize(
        "n,expected",
        [
            (1, ClusterClass.ACCEPTED_XRAY),
            (2, ClusterClass.ACCEPTED_XRAY),
            (3, ClusterClass.REJECTED_NOISE),
            (4, ClusterClass.REJECTED_TRACK),
            (8, ClusterClass.REJECTED_TRACK),
        ],
    )
    def test_pixel_count_rules(self, n, expected):
        assert classify_cluster(line_cluster(n)) is expected
        assert line_cluster(n).classification is expected

    def test_track_found_in_frame(self):
        """An 8-pixel straight segment is rejected as a track."""
        frame = frame_with(*[(x, 7, 300) for x in range(2, 10)])
        (cluster,) = find_clusters(frame, noise_sigma_adc=NOISE)
        assert cluster.pixel_count == 8
        assert classify_cluster(cluster) is ClusterClass.REJECTED_TRACK


class TestCalibrate:
    def test_gain_and_offset(self):
        """Energy is gain * summed ADC + offset, in keV."""
        cluster = Cluster(xs=np.array([0, 1]), ys=np.array([0, 0]), adc=np.array([1000, 1000]))
        assert calibrate(cluster, EnergyCalibration(gain=3.65, offset=20.0)) == pytest.approx(7.32)

    def test_round_trip_through_frame(self):
        """A noiseless single hit calibrates back to its energy within one ADC count."""
        calibration = EnergyCalibration()
        frame = synthesize_frame([((8, 8), 7.729)], 0.0, 0.0, calibration, np.random.default_rng(0), 16, 16)
        (cluster,) = find_clusters(frame, noise_sigma_adc=NOISE)
        assert calibrate(cluster, calibration) == pytest.approx(7.729, abs=2 * calibration.gain / 1000)


class TestReconstructEnergies:
    def test_only_xrays_give_energies(self):
        frames = [frame_with((2, 2, 2000)), frame_with(*[(x, 7, 300) for x in range(2, 10)])]
        result = reconstruct_energies(frames, EnergyCalibration(), NOISE)
        assert result.energies.tolist() == pytest.approx([7.3])
        assert result.class_counts[ClusterClass.ACCEPTED_XRAY] == 1
        assert result.class_counts[ClusterClass.REJECTED_TRACK] == 1


class TestMeasureCorpus:
    def test_acceptance_and_rejection(self):
        """At SNR well above 10 the clustering keeps X rays and drops tracks."""
        frames = synthesize_corpus(20, 5, CorpusSpec())
        rates = measure_corpus(frames, NOISE)
        assert rates.injected_hits == 80
        assert rates.xray_acceptance >= 0.95
        assert rates.track_rejection >= 0.99

    def test_needs_truth(self):
        with pytest.raises(DomainError):
            measure_corpus([frame_with()], NOISE)

    @pytest.mark.slow
    def test_ten_thousand_frames(self):
        """Regression baseline on a 1e4-frame corpus."""
        frames = synthesize_corpus(10_000, 2005, CorpusSpec(), workers=4)
        rates = measure_corpus(frames, NOISE)
        assert rates.xray_acceptance >= 0.95
        assert rates.track_rejection >= 0.99
