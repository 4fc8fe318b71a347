"""Self-adaptive two-tier peer-to-peer monitoring.

Followers probe indicators and push differential reports to a Leader; each
peer runs its own monitor/analyze/plan/execute loop over a local knowledge
base, adapting sampling rates and the active indicator set through a small
rule language. A deterministic virtual-clock harness benchmarks the adaptive
behavior against a fixed-rate baseline.
"""

__version__ = "0.1.0"
