"""Tests for the attenuation table and Beer-Lambert survival."""

import math

import numpy as np
import pytest

from vip_sim.errors import DomainError, FileFormatError
from vip_sim.transport.attenuation import AttenuationTable, attenuation_survival


@pytest.fixture
def copper():
    return AttenuationTable.copper()


class TestAttenuationTable:
    def test_shipped_table_covers_k_lines(self, copper):
        """The shipped copper table spans the K-alpha region."""
        lo, hi = copper.span
        assert lo <= 7.0 and hi >= 9.0

    def test_node_values_returned_exactly(self, copper):
        """At a node the interpolation returns the tabulated length."""
        assert copper.attenuation_length(8.0) == pytest.approx(2.123828e-03, rel=1e-12)

    def test_log_log_interpolation(self):
        """Between nodes the length follows a power law through its neighbours."""
        table = AttenuationTable(np.array([6.0, 10.0]), np.array([1e-3, 4e-3]))
        midpoint = math.sqrt(6.0 * 10.0)
        assert table.attenuation_length(midpoint) == pytest.approx(2e-3, rel=1e-12)

    def test_violating_line_length(self, copper):
        """About 19 micrometres at 7.729 keV, below the K edge."""
        assert copper.attenuation_length(7.729) == pytest.approx(19.3e-4, rel=0.02)

    def test_from_csv_text(self):
        """Tables parse from the energy_keV,attenuation_length_cm CSV."""
        text = "# test\nenergy_keV,attenuation_length_cm\n6.0,1e-3\n10.0,4e-3\n"
        table = AttenuationTable.from_csv_text(text)
        assert table.span == (6.0, 10.0)

    def test_wrong_header(self):
        """A CSV with another header is a format error."""
        with pytest.raises(FileFormatError):
            AttenuationTable.from_csv_text("energy,length\n6.0,1e-3\n10.0,4e-3\n")

    def test_unsorted_energies(self):
        """Energies must increase strictly."""
        with pytest.raises(DomainError):
            AttenuationTable(np.array([6.0, 10.0, 9.5]), np.array([1e-3, 4e-3, 3e-3]))

    def test_non_positive_length(self):
        """Attenuation lengths must be positive."""
        with pytest.raises(DomainError):
            AttenuationTable(np.array([6.0, 10.0]), np.array([1e-3, 0.0]))

    def test_span_too_narrow(self):
        """A table must cover at least 7-9 keV."""
        with pytest.raises(DomainError):
            AttenuationTable(np.array([7.5, 10.0]), np.array([1e-3, 4e-3]))

    def test_missing_file(self, tmp_path):
        """An unreadable table file is reported as a format error."""
        with pytest.raises(FileFormatError):
            AttenuationTable.load(tmp_path / "absent.csv")


class TestAttenuationSurvival:
    def test_zero_path(self, copper):
        assert attenuation_survival(0.0, 8.0, copper) == 1.0

    def test_one_attenuation_length(self, copper):
        """Crossing one attenuation length leaves 1/e."""
        length = copper.attenuation_length(8.0)
        assert attenuation_survival(length, 8.0, copper) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_composition(self, copper):
        """survival(a + b) = survival(a) * survival(b)."""
        a, b = 12e-4, 31e-4
        combined = attenuation_survival(a + b, 7.729, copper)
        product = attenuation_survival(a, 7.729, copper) * attenuation_survival(b, 7.729, copper)
        assert combined == pytest.approx(product, abs=1e-12)

    def test_fifty_micrometres(self, copper):
        """Survival through the shell at 8 keV is a probability that decreases with path."""
        thin = attenuation_survival(25e-4, 8.0, copper)
        thick = attenuation_survival(50e-4, 8.0, copper)
        assert 0.0 < thick < thin < 1.0

    def test_energy_outside_table(self, copper):
        """Energies outside the table span are a domain error."""
        with pytest.raises(DomainError):
            attenuation_survival(1e-3, 100.0, copper)

    def test_negative_path(self, copper):
        with pytest.raises(DomainError):
            attenuation_survival(-1e-4, 8.0, copper)
