import sys

import pytest

from bandcodec.codec import CodecConfig
from bandcodec.pyramid import NetSpec

SMALL_SHAPE = (4, 18, 36)


def make_quick_cfg() -> CodecConfig:
    """Cheap settings for a small grid. The loose tolerance is what such small
    networks reach there; these tests check bookkeeping, not quality."""
    return CodecConfig(
        eps=3e-2,
        quantile=0.99,
        thumb=NetSpec(2, 16, 14.0),
        low_residual=NetSpec(1, 8, 15.0),
        mid_block=NetSpec(1, 8, 22.0),
        trc_thumb=NetSpec(2, 8, 15.0),
        trc_residual=NetSpec(1, 8, 16.0),
        thumb_steps=300,
        block_steps=300,
        idm_budget=300,
        max_depth=1,
        warm_steps=100,
        trc_steps=150,
    )


@pytest.fixture
def quick_cfg() -> CodecConfig:
    return make_quick_cfg()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
