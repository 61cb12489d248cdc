# multilayer_onn/utils/metrics.py
# Purpose: Prometheus metrics collection

"""
Metrics utilities for monitoring simulation runs.
"""

from prometheus_client import Counter, Histogram, Gauge, CollectorRegistry, generate_latest


# Global metrics registry
REGISTRY = CollectorRegistry()

# Run metrics
runs_total = Counter(
    'onn_runs_total',
    'Total number of CLI runs',
    ['command', 'status'],
    registry=REGISTRY
)

stage_seconds = Histogram(
    'onn_stage_seconds',
    'Stage duration in seconds',
    ['stage'],
    buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0],
    registry=REGISTRY
)

rays_traced_total = Counter(
    'onn_rays_traced_total',
    'Total number of Monte Carlo rays traced',
    registry=REGISTRY
)

training_epochs_total = Counter(
    'onn_training_epochs_total',
    'Total number of completed training epochs',
    registry=REGISTRY
)

calibration_probes_total = Counter(
    'onn_calibration_probes_total',
    'Total number of single-weight calibration probes',
    registry=REGISTRY
)

run_errors_total = Counter(
    'onn_run_errors_total',
    'Total number of run errors by module',
    ['module'],
    registry=REGISTRY
)

# In-flight gauge
runs_in_progress = Gauge(
    'onn_runs_in_progress',
    'Number of runs currently in progress',
    registry=REGISTRY
)


class MetricsCollector:
    """
    Collector for run and stage metrics.
    """

    def record_run_start(self) -> None:
        """Record the start of a run."""
        runs_in_progress.inc()

    def record_run_success(self, command: str) -> None:
        """
        Record successful run completion.

        Args:
            command: Command that finished
        """
        runs_total.labels(command=command, status='success').inc()
        runs_in_progress.dec()

    def record_run_failure(self, command: str, module: str) -> None:
        """
        Record run failure.

        Args:
            command: Command that failed
            module: Module tag of the error
        """
        runs_total.labels(command=command, status='failure').inc()
        run_errors_total.labels(module=module).inc()
        runs_in_progress.dec()

    def record_stage(self, stage: str, duration: float) -> None:
        """Observe one stage duration."""
        stage_seconds.labels(stage=stage).observe(duration)

    def record_rays(self, count: int) -> None:
        rays_traced_total.inc(count)

    def record_epoch(self) -> None:
        training_epochs_total.inc()

    def record_probes(self, count: int) -> None:
        calibration_probes_total.inc(count)

    def exposition(self) -> bytes:
        """
        Render the registry in the Prometheus text format.

        Returns:
            bytes: Text exposition for metrics.prom.
        """
        return generate_latest(REGISTRY)


# Global metrics collector instance
metrics_collector = MetricsCollector()
