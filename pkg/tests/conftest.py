import numpy as np
import pytest

from ensemblefs.config import RunConfig, SynthSource
from ensemblefs.dataset import Dataset, FeatureDescriptor, normalize_minmax, synth_generate
from ensemblefs.learners import ForestConfig, LogRegConfig
from ensemblefs.selectors import SBSCriterion, SelectorConfig

ACCEPTANCE_LINES = []


def make_dataset(values, labels, names=None, provenance="test"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or [f"f{j}" for j in range(values.shape[1])]
    cols = tuple(FeatureDescriptor(j, n, train_min=float(values[:, j].min()),
                                   train_max=float(values[:, j].max()))
                 for j, n in enumerate(names))
    return Dataset(cols, values, np.asarray(labels), provenance=provenance)


@pytest.fixture(scope="session")
def planted():
    """Normalized noise-free synthetic pair: 3 informative, 2 redundant, 10 noise."""
    train, test = synth_generate(1000, 3, 10, 2, 0.0, seed=11)
    return normalize_minmax(train, train), normalize_minmax(train, test)


@pytest.fixture(scope="session")
def label_copy():
    """Feature 0 equals the label; features 1..5 are independent noise."""
    rng = np.random.default_rng(5)
    y = np.array([0, 1] * 150)
    rng.shuffle(y)
    X = np.column_stack([y.astype(float)] + [rng.random(len(y)) for _ in range(5)])
    return make_dataset(X, y, provenance="label-copy")


def small_config(seed=3, n_rows=400, n_noise=6, flip_prob=0.0, **overrides):
    """Quick synthetic run: small forests everywhere, 3-fold CV."""
    kw = dict(
        learners={"RF": ForestConfig(n_trees=20), "LR": LogRegConfig()},
        selector_settings=SelectorConfig(importance=ForestConfig(n_trees=20),
                                         sbs=SBSCriterion(3, ForestConfig(n_trees=5))),
        cv_folds=3,
        synth=SynthSource(n_rows=n_rows, n_informative=3, n_noise=n_noise, n_redundant=2,
                          flip_prob=flip_prob),
    )
    kw.update(overrides)
    return RunConfig(seed=seed, **kw)


def small_config_doc(seed=3, n_rows=400, n_noise=6, flip_prob=0.0):
    """JSON form of :func:`small_config` for the CLI."""
    return {
        "seed": seed,
        "synth": {"n_rows": n_rows, "n_informative": 3, "n_noise": n_noise, "n_redundant": 2,
                  "flip_prob": flip_prob},
        "learners": {"RF": {"n_trees": 20}, "LR": {}},
        "selector_settings": {"importance": {"n_trees": 20}, "sbs": {"folds": 3, "n_trees": 5}},
        "cv_folds": 3,
    }


@pytest.fixture(scope="session")
def small_report():
    from ensemblefs.evaluation import run_experiment
    return run_experiment(small_config())


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
