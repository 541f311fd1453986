"""vip-sim - Monte Carlo and limit-setting toolkit for Pauli-violating X-ray searches in copper."""

__version__ = "0.3.0"
