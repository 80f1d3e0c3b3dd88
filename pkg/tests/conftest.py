from pathlib import Path

import pytest

from gazeaudit import fixtures
from gazeaudit.cli import main as cli_main


@pytest.fixture(scope="session")
def demo(tmp_path_factory) -> fixtures.DemoDataset:
    root = tmp_path_factory.mktemp("demo")
    return fixtures.build_demo_dataset(root)


@pytest.fixture(scope="session")
def gt_dir_v1(demo, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("gt_v1")
    rc = cli_main([
        "salmap", "--manifest", str(demo.manifest_path),
        "--video", "v1", "--out-dir", str(out),
    ])
    assert rc == 0
    return out
