from hypothesis import settings

# Deterministic property tests: reruns of the suite explore the same cases.
settings.register_profile("repo", derandomize=True, max_examples=100)
settings.load_profile("repo")
