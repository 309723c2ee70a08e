import numpy as np
import pytest

from fieldlang import codec, synth
from fieldlang.core import FieldSnapshot, GridSpec


@pytest.fixture(scope="session")
def tg256():
    return synth.gen_taylor_green(256)


@pytest.fixture(scope="session")
def lamb_single256():
    return synth.gen_lamb_oseen(
        256, [synth.LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.05)]
    )


@pytest.fixture(scope="session")
def codebook512():
    """K=512 codebook trained on a cross-section of the oracle suite."""
    picks = {0, 25, 52, 75, 110, 150}
    batches = []
    for i, case in enumerate(synth.iter_suite(256, 42)):
        if i in picks:
            batches.append(codec.extract_patches(codec.to_rgb(case.snapshot), 16))
        if i >= max(picks):
            break
    patches = np.concatenate(batches, axis=0)
    return codec.train_codebook(patches, 512, 42)


def make_snapshot(u, v, p, grid=None) -> FieldSnapshot:
    u = np.asarray(u, dtype=float)
    if grid is None:
        grid = GridSpec(width=u.shape[1], height=u.shape[0])
    return FieldSnapshot(grid=grid, u=u, v=v, p=p)


def random_snapshot(rng: np.random.Generator, n: int = 64) -> FieldSnapshot:
    grid = GridSpec(width=n, height=n)
    return FieldSnapshot(
        grid=grid,
        u=rng.normal(size=(n, n)),
        v=rng.normal(size=(n, n)),
        p=rng.normal(size=(n, n)),
    )
