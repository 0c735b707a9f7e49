import pytest

from poissonize import cli

FIGURE_NAMES = ("fig1a", "fig1b", "fig2", "fig3")


@pytest.fixture(scope="session")
def figure_data(tmp_path_factory):
    """All four figure presets, generated once and shared across tests."""
    root = tmp_path_factory.mktemp("figures")
    for name in FIGURE_NAMES:
        assert cli.main(["figure", name, "--out", str(root / name)]) == 0
    return root
