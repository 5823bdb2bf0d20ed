import json
import os

import numpy as np
import pytest

from qsafeml import metrics


@pytest.fixture(autouse=True)
def _shadow_checks(monkeypatch):
    monkeypatch.setattr(metrics, "shadow_checks", True)


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


def random_density(rng, n, rank=None):
    """Random mixture of ``rank`` pure states (full rank by default)."""
    rank = n if rank is None else rank
    vecs = rng.standard_normal((rank, n)) + 1j * rng.standard_normal((rank, n))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    w = rng.dirichlet(np.ones(rank))
    return np.einsum("k,ki,kj->ij", w, vecs, vecs.conj())


def random_pair_stream(seed, count, dims=range(2, 9)):
    """Mixed, pure and rank-deficient density-matrix pairs for property sweeps."""
    rng = np.random.default_rng(seed)
    dims = list(dims)
    for i in range(count):
        n = dims[i % len(dims)]
        ranks = [n, 1, max(1, n // 2)]
        yield (random_density(rng, n, ranks[i % 3]), random_density(rng, n, ranks[(i // 3) % 3]))


S1_STEPS = [
    ["synth", "--out", "s1.csv"],
    ["train", "--data", "s1.csv", "--out", "model.json"],
    ["predict", "--model", "model.json", "--data", "s1.csv", "--out", "records.jsonl"],
    ["monitor", "--records", "records.jsonl", "--out", "report.json", "--plots-dir", "plots",
     "--dataset-id", "s1"],
]


def run_cli(argv, cwd, capsys=None):
    """Run the CLI in ``cwd``; returns ``(exit_code, stdout_lines)``."""
    import contextlib
    import io

    from qsafeml.cli import main

    out = io.StringIO()
    old = os.getcwd()
    os.chdir(cwd)
    try:
        with contextlib.redirect_stdout(out):
            code = main(argv)
    finally:
        os.chdir(old)
    return code, out.getvalue().splitlines()


@pytest.fixture(scope="session")
def s1_pipeline(tmp_path_factory):
    """The S1 synth -> train -> predict -> monitor run, executed once per session."""
    import time

    root = tmp_path_factory.mktemp("s1")
    outputs = {}
    start = time.perf_counter()
    for argv in S1_STEPS:
        code, lines = run_cli(argv, root)
        assert code == 0, (argv, lines)
        outputs[argv[0]] = json.loads(lines[-1])
    return {"dir": root, "outputs": outputs, "seconds": time.perf_counter() - start}


ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
