"""Shared pytest configuration: the acceptance verdict summary."""

import re

CRITERIA = {
    1: "assignment solver equals brute-force minimum",
    2: "cost model bounds and sentinel behavior",
    3: "identity builds match perfectly",
    4: "true pairs beat decoy pairs",
    5: "optimization-level similarity stability",
    6: "inline predictor TPR/FPR on held-out builds",
    7: "weight trainer recovers discriminating features",
    8: "CLI byte-level determinism",
    9: "ground-truth tallies partition to one",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _PATTERN.search(getattr(rep, "nodeid", ""))
            if m:
                verdicts[int(m.group(1))] = verdict
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(verdicts):
        name = CRITERIA.get(n, "criterion")
        terminalreporter.write_line(f"criterion {n} ({name}): {verdicts[n]}")