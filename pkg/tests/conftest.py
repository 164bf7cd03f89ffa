import io
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from scmkit import simlab
from scmkit.panel import Panel, load_panel
from scmkit.study import PredictorSpec, StudySpec, load_spec

CHILE_REGIONS = (
    "Tarapacá", "Antofagasta", "Atacama", "Coquimbo", "Valparaíso", "Metropolitana",
    "Libertador Bernardo O'Higgins", "Bio-Bio", "Araucanía", "De Los Lagos", "Aysén",
    "Magallanes",
)


def chile_like_config(**kw) -> simlab.SimConfig:
    """13 regions, 1985-2015, Maule treated from 2010."""
    base = dict(J=12, T=31, T0=25, first_year=1985, seed=2010, unit_names=CHILE_REGIONS,
                treated_name="Maule")
    base.update(kw)
    return simlab.SimConfig(**base)


def data_path(name: str):
    return resources.files("scmkit") / "data" / name


@pytest.fixture(scope="session")
def nz_config() -> simlab.SimConfig:
    return simlab.load_sim_config(data_path("nz_like_sim.json"))


@pytest.fixture(scope="session")
def nz_panel() -> Panel:
    return load_panel(data_path("nz_like_panel.csv").read_bytes())


@pytest.fixture(scope="session")
def nz_study() -> StudySpec:
    return load_spec(data_path("nz_like_study.json"))


@pytest.fixture(scope="session")
def chile_panel() -> Panel:
    return simlab.generate_panel(chile_like_config())[0]


def tiny_panel(rows) -> Panel:
    """Panel from (unit, time, variable, value) tuples."""
    return Panel.from_cells(rows)


def csv_bytes(lines) -> bytes:
    return ("\n".join(lines) + "\n").encode()


def mean_study(cfg: simlab.SimConfig, **kw) -> StudySpec:
    """Pre-window outcome mean plus extras; fast to fit."""
    return replace(simlab.default_study(cfg, lagged=False), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
