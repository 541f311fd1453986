"""Photon transport through the copper target onto the CCD ring."""
