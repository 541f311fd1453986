"""CCD response simulation and event reconstruction."""
