"""telemscan: streaming residual-based anomaly detection for telemetry."""

__version__ = "0.1.0"
