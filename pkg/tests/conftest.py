import numpy as np
import pytest

from avaba.data import FIELDS, Label, TelemetryFrame


def make_frame(t=0.0, label=Label.UNLABELED, **overrides):
    values = {name: 0.0 for name in FIELDS}
    values.update(timestamp=t, arm=True, throttle=10.0)
    values.update(overrides)
    return TelemetryFrame(label=label, **values)


def make_frames(times, label=Label.UNLABELED, **columns):
    out = []
    for i, t in enumerate(times):
        row = {k: float(np.asarray(v)[i]) for k, v in columns.items()}
        out.append(make_frame(float(t), label, **row))
    return out


@pytest.fixture
def frame_factory():
    return make_frame
