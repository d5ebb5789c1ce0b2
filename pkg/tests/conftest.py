import itertools

import numpy as np
import pytest

from ecaif.blanket import CONTROLLABLE, NON_CONTROLLABLE, BlockedRule, EnvironmentSpec, Feature, WhatEntry
from ecaif.scenario import load_scenario

GRID_WHERES = ("P1", "UO", "Int.", "CO", "P5", "P6", "P7", "P8", "P9", "P10",
                "P11", "P12", "P13", "P14", "P15")
UR5E_REACH = ("P1", "UO", "P6", "P7", "P8", "P11", "P12", "P13", "Int.", "P9", "P14")
COBOTTA_REACH = ("CO", "P5", "P10", "P15", "Int.", "P9", "P14")


def idx(labels):
    return tuple(sorted(GRID_WHERES.index(x) for x in labels))


def two_arm_env(orientation=False):
    whats = (
        WhatEntry("UR5e", CONTROLLABLE, GRID_WHERES.index("UO"), idx(UR5E_REACH)),
        WhatEntry("COBOTTA", CONTROLLABLE, GRID_WHERES.index("CO"), idx(COBOTTA_REACH)),
        WhatEntry("object", NON_CONTROLLABLE, GRID_WHERES.index("P7")),
    )
    features, rules = (), ()
    if orientation:
        features = (Feature("orientation", "COBOTTA", ("facing-away", "facing-target")),)
        rules = (BlockedRule("UR5e", GRID_WHERES.index("P14"), "orientation", 1, True),)
    return EnvironmentSpec(GRID_WHERES, whats, features, rules)


@pytest.fixture
def env():
    return two_arm_env()


@pytest.fixture
def env_orient():
    return two_arm_env(orientation=True)


@pytest.fixture(scope="session")
def shipped():
    return {name: load_scenario(name) for name in
            ("scenario1a", "scenario1a-agent", "scenario1b", "scenario1b-agent",
             "scenario2-away", "scenario2-facing")}


def random_env(rng, max_joint=64, allow_features=True):
    """Small random environment with joint state size <= ``max_joint``."""
    while True:
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 4))
        n_feat = int(rng.integers(0, 2)) if allow_features else 0
        if m ** n * 2 ** n_feat <= max_joint:
            break
    wheres = tuple(f"w{j}" for j in range(m))
    n_ctrl = int(rng.integers(1, n + 1))
    whats = []
    for i in range(n):
        if i < n_ctrl:
            k = int(rng.integers(1, m + 1))
            reach = tuple(sorted(int(x) for x in rng.choice(m, size=k, replace=False)))
            whats.append(WhatEntry(f"R{i}", CONTROLLABLE, int(rng.choice(reach)), reach))
        else:
            whats.append(WhatEntry(f"o{i}", NON_CONTROLLABLE, int(rng.integers(m))))
    features, rules = [], []
    if n_feat:
        features.append(Feature("f0", "R0", ("off", "on"), int(rng.integers(2))))
        for _ in range(int(rng.integers(1, 3))):
            rules.append(BlockedRule(f"R{int(rng.integers(n_ctrl))}", int(rng.integers(m)), "f0",
                                     int(rng.integers(2)), bool(rng.integers(2))))
    return EnvironmentSpec(wheres, tuple(whats), tuple(features), tuple(rules))


def random_belief(rng, sizes, delta=False):
    if delta:
        return [np.eye(s)[rng.integers(s)] for s in sizes]
    out = []
    for s in sizes:
        w = rng.random(s) * (rng.random(s) > 0.3)
        if w.sum() == 0:
            w[rng.integers(s)] = 1.0
        out.append(w / w.sum())
    return out


def tuples_of(sizes):
    return list(itertools.product(*(range(s) for s in sizes)))


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda x: int(x.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
