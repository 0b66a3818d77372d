# Prometheus metrics for Monte Carlo replications
from prometheus_client import CollectorRegistry, Counter, Histogram

REGISTRY = CollectorRegistry()

REPLICATION_DURATION_SECONDS = Histogram(
    "peerinf_replication_duration_seconds",
    "Time spent executing one replication",
    ["setting"],
    registry=REGISTRY,
)

REPLICATIONS_TOTAL = Counter(
    "peerinf_replications_total",
    "Total number of replications executed",
    ["setting", "status"],
    registry=REGISTRY,
)
