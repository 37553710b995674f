import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from stltube import stl  # noqa: E402
from stltube.cli import symmetric_ring_plan  # noqa: E402
from stltube.contracts import baseline_templates  # noqa: E402
from stltube.scenario import power_ring_scenario, scenario_from_dict  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class RingCase:
    """Three-area ring with the case-study specification, solved once per session."""

    def __init__(self, eta=3):
        self.raw = power_ring_scenario(eta)
        self.sc = scenario_from_dict(self.raw)
        self.net = self.sc.network
        self.plan = symmetric_ring_plan(self.sc)
        self.formula = stl.normalize_negation_free(self.sc.formula)
        self.templates = baseline_templates(self.net)
        self._dist = None

    @property
    def distributed(self):
        if self._dist is None:
            from stltube.compositional import run_distributed
            self._dist = run_distributed(self.net, self.formula, self.plan, self.templates,
                                         max_iter=200)
        return self._dist


@pytest.fixture(scope="session")
def ring3():
    return RingCase(3)
