"""Prometheus counters for simulation throughput.

The counters live on a private registry so importing the package never
touches the process-global default one; the CLI dumps it to a textfile
when ``VIP_METRICS_FILE`` is set.
"""

import os
from typing import Union

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

registry = CollectorRegistry()

# Transport metrics
photons_transported_total = Counter(
    "vip_photons_transported_total",
    "Photons followed by the transport Monte Carlo",
    ["outcome"],
    registry=registry,
)

transport_chunk_seconds = Histogram(
    "vip_transport_chunk_seconds",
    "Wall time of one transport chunk",
    buckets=(0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0),
    registry=registry,
)

# CCD metrics
frames_synthesized_total = Counter(
    "vip_frames_synthesized_total",
    "Synthetic CCD frames generated",
    registry=registry,
)

clusters_total = Counter(
    "vip_clusters_total",
    "Clusters found in CCD frames",
    ["classification"],
    registry=registry,
)

# Spectrum metrics
events_generated_total = Counter(
    "vip_events_generated_total",
    "Energy deposits generated for simulated runs",
    ["run", "component"],
    registry=registry,
)


def write_metrics(path: Union[str, os.PathLike]) -> None:
    write_to_textfile(str(path), registry)
