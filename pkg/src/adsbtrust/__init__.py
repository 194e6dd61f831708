"""ADS-B trust framework: decoding, edge/fog analysis, permissioned ledger and benchmarks."""

__version__ = "0.1.0"
