from dataclasses import dataclass

import pytest

from puf_aging import streams
from puf_aging.agingmodel import PUBLISHED_AF, DeviceModel, StressProfile, age, new_device, readout_set
from puf_aging.asr import SelectionConfig
from puf_aging.bitcore import ReadoutSet, Role

PIPELINE_SEED = 2024
STRESS = StressProfile(af_override=PUBLISHED_AF)


@dataclass(frozen=True)
class Pipeline:
    fresh: DeviceModel
    aged: DeviceModel
    rt: ReadoutSet
    ht: ReadoutSet
    holdout: ReadoutSet
    post: ReadoutSet
    selection: SelectionConfig


def build_pipeline(seed: int = PIPELINE_SEED, cell_count: int = 2**18, repeats: int = 9,
                   stress_hours: float = 48) -> Pipeline:
    sel = SelectionConfig(repeats)
    dev = new_device(seed, cell_count=cell_count)
    key = lambda tag: streams.stream_key(seed, tag)  # noqa: E731
    aged = age(dev, stress_hours, STRESS)
    return Pipeline(
        fresh=dev,
        aged=aged,
        rt=readout_set(dev, sel.rt, repeats, key("pre_rt")),
        ht=readout_set(dev, sel.ht, repeats, key("pre_ht")),
        holdout=readout_set(dev, sel.rt, repeats, key("pre_rt_holdout")),
        post=readout_set(aged, sel.rt, repeats, key("post_rt"), role=Role.POST_AGING),
        selection=sel,
    )


@pytest.fixture(scope="session")
def pipeline() -> Pipeline:
    return build_pipeline()


# -- acceptance reporting -------------------------------------------------------

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def criterion(request):
    """Recorder for one acceptance criterion; the number comes from the test
    name (``test_criterion_07_...``). A test that dies before recording is
    reported as FAIL."""
    number = int(request.node.name.split("_")[2])
    verdicts = request.config.stash[_VERDICTS]

    def record(ok: bool, detail: str) -> bool:
        line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        verdicts[number] = line
        print(line)
        return ok

    yield record
    verdicts.setdefault(number, f"CRITERION {number:2d} FAIL: no verdict recorded (test errored)")


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])
