import logging

from hypothesis import HealthCheck, settings

# Keep CI runs deterministic and immune to slow-machine deadline flakes.
settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

# Rule warnings about unknown indicators are expected noise in several tests.
logging.getLogger("peermon.rules").setLevel(logging.ERROR)
