import os

import hypothesis
import numpy as np
import pytest

from singlering.services.measures import DiscreteMeasure, symmetrize

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def two_atom():
    """(δ_{1/2} + δ_2)/2."""
    return DiscreteMeasure.from_atoms([(0.5, 0.5), (2.0, 0.5)])


@pytest.fixture
def dirac_one():
    return DiscreteMeasure.dirac(1.0)


@pytest.fixture
def uniform_quantile_40():
    """Mid-quantile discretization of Uniform[0.5, 2] with 40 atoms."""
    q = (np.arange(1, 41) - 0.5) / 40
    return DiscreteMeasure.from_arrays(0.5 + 1.5 * q)


@pytest.fixture
def uniform_sym_40(uniform_quantile_40):
    return symmetrize(uniform_quantile_40)


@pytest.fixture
def results_dir(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    return out
