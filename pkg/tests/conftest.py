import numpy as np
import pytest

from fallsift.core import AccelSample, AccelWindow, Label, Source


def make_window(
    xyz=None,
    n=8,
    t0_ms=0,
    subject_id="s",
    label=Label.ADL,
    activity=None,
    source=Source.BASE,
    seed=None,
):
    if xyz is None:
        if seed is not None:
            xyz = np.random.default_rng(seed).normal(size=(n, 3))
        else:
            xyz = np.zeros((n, 3))
    return AccelWindow(
        xyz=np.asarray(xyz, dtype=np.float64),
        t0_ms=t0_ms,
        subject_id=subject_id,
        label=label,
        activity=activity,
        source=source,
    )


def make_stream(n, dt=32, start=0):
    rng = np.random.default_rng(n)
    return [
        AccelSample(t=start + i * dt, x=float(rng.normal()), y=float(rng.normal()), z=float(rng.normal()))
        for i in range(n)
    ]


@pytest.fixture
def window_factory():
    return make_window
