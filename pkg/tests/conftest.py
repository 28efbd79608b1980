import pytest

from incremental_aoi.analytic import solve_lambda_star
from incremental_aoi.policies import ThresholdB2


class GapList:
    """Replays a fixed list of inter-arrival gaps, then an endless quiet period."""

    def __init__(self, gaps, tail=1e12):
        self.gaps = list(gaps)
        self.tail = tail
        self.i = 0

    def next_interarrival(self):
        if self.i < len(self.gaps):
            self.i += 1
            return self.gaps[self.i - 1]
        return self.tail


@pytest.fixture(scope="session")
def optimum():
    return solve_lambda_star(1e-12)


@pytest.fixture(scope="session")
def optimal_policy(optimum):
    return ThresholdB2(optimum.lambda_star, optimum.x1_star)
