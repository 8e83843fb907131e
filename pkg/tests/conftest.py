from hypothesis import HealthCheck, settings

settings.register_profile(
    "freemal", deadline=None, suppress_health_check=[HealthCheck.filter_too_much]
)
settings.load_profile("freemal")
