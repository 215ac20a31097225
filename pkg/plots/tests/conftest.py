"""Fixtures that materialize real harness outputs through the primary CLI.

The plotting package only ever reads files, so the fixtures produce those
files the same way a user would: by invoking the simulator's command line.
"""

import json
import subprocess
import sys
import textwrap

import pytest
import yaml


def run_cli(*args, cwd=None):
    proc = subprocess.run(
        [sys.executable, "-m", "driftbandit.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def _write_config(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return path


@pytest.fixture(scope="session")
def scaling_outputs(tmp_path_factory):
    """A small horizon sweep: summary with an exponent fit plus run CSVs."""
    root = tmp_path_factory.mktemp("scaling")
    cfg = _write_config(root / "cfg.yaml", {
        "name": "sweep",
        "env": {"kind": "stationary_hard", "T": 64, "d": 1, "K": 2},
        "algo": {"name": "uniform_random", "shift_mode": "off"},
        "replicates": 3,
        "sweep": [64, 128, 256],
        "output_dir": str(root / "out"),
        "base_seed": 11,
    })
    run_cli("sweep", str(cfg))
    return root / "out" / "sweep" / "summary.json"


@pytest.fixture(scope="session")
def flip_outputs(tmp_path_factory):
    """Two single-horizon summaries (two policies, common random numbers)."""
    root = tmp_path_factory.mktemp("flip")
    paths = {}
    for name in ("cmeta", "stationary_se"):
        cfg = _write_config(root / f"{name}.yaml", {
            "name": name,
            "env": {"kind": "flip", "T": 256, "d": 1, "K": 2,
                    "best_arms": [0, 1], "gap": 0.9},
            "algo": {"name": name, "C0": 1.0, "shift_mode": "off"},
            "replicates": 3,
            "output_dir": str(root / "out"),
            "base_seed": 21,
        })
        run_cli("run", str(cfg))
        paths[name] = root / "out" / name / "summary.json"
    return paths


@pytest.fixture(scope="session")
def shift_report(tmp_path_factory):
    """A detect-shifts report over a dumped flip environment."""
    root = tmp_path_factory.mktemp("shifts")
    script = textwrap.dedent(
        """
        import numpy as np
        from driftbandit.environments import make_flip_env
        from driftbandit.envio import dump_env
        env = make_flip_env(256, 1, [0, 1], 0.8, noise="noiseless")
        dump_env(env, "env.yaml")
        rng = np.random.default_rng(5)
        xs = rng.random((256, 1))
        with open("contexts.csv", "w") as fh:
            fh.write("x1\\n")
            for v in xs[:, 0]:
                fh.write(repr(float(v)) + "\\n")
        """
    )
    subprocess.run([sys.executable, "-c", script], cwd=root, check=True)
    run_cli("detect-shifts", "env.yaml", "contexts.csv", "--output", "report.yaml", cwd=root)
    return root / "report.yaml"


@pytest.fixture()
def corrupted_summary(tmp_path, scaling_outputs):
    """Copy of the sweep summary with the annotated slope perturbed."""
    doc = json.loads(scaling_outputs.read_text())
    doc["fit"]["slope"] += 1e-3
    bad = tmp_path / "summary.json"
    bad.write_text(json.dumps(doc))
    # keep the runs directory discoverable next to the copy
    (tmp_path / "runs").symlink_to(scaling_outputs.parent / "runs")
    return bad
