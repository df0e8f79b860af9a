import hypothesis

from mitofuse.geometry import DetBox

# Property tests share the CI budget with the acceptance suite; cap the
# per-test example count and disable the wall-clock deadline (the first
# example pays numpy warm-up costs).
hypothesis.settings.register_profile(
    "suite", max_examples=60, deadline=None,
)
hypothesis.settings.load_profile("suite")

# One line per acceptance criterion, recorded by tests/test_acceptance.py and
# replayed after the run so the verdicts survive pytest's output capture.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def box(x0, y0, x1, y1, score=0.5, label=0, model_id=0, frame_id="image") -> DetBox:
    return DetBox(
        x_min=float(x0), y_min=float(y0), x_max=float(x1), y_max=float(y1),
        score=float(score), label=label, model_id=model_id, frame_id=frame_id,
    )
