import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=int(os.environ.get("MGTLAB_HYPOTHESIS_EXAMPLES", "60")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import SUMMARY

    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in sorted(SUMMARY, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
