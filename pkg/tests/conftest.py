"""Shared fixtures: a linear ground-truth factory and acceptance reporting."""

import numpy as np
import pytest

from predvar.model import PredVarParams, companion_matrix, spectral_radius


def make_linear_truth(seed, p=6, ell=3, order=2, radius=0.8, cond_cap=6.0,
                      innov=(0.5, 1.5), static=(0.2, 0.5)):
    """Random stable ground truth with a well-conditioned loadings stack.

    The lag coefficients are scaled so the companion matrix has the given
    spectral radius, with higher lags damped geometrically; both noise
    covariances are random SPD matrices with eigenvalues in the given
    ranges.  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    while True:
        stack = rng.standard_normal((p, p))
        if np.linalg.cond(stack) < cond_cap:
            break
    loadings, static_loadings = stack[:, :ell].copy(), stack[:, ell:].copy()
    coeffs = [rng.standard_normal((ell, ell)) / np.sqrt(ell) for _ in range(order)]
    alpha = radius / spectral_radius(companion_matrix(coeffs))
    coeffs = tuple(c * alpha ** (j + 1) for j, c in enumerate(coeffs))

    def spd(dim, lo, hi):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return q @ np.diag(rng.uniform(lo, hi, dim)) @ q.T

    return PredVarParams(loadings, static_loadings, innovation_cov=spd(ell, *innov),
                         static_noise_cov=spd(p - ell, *static), var_coeffs=coeffs)


@pytest.fixture
def linear_truth_factory():
    return make_linear_truth


# ---------------------------------------------------------------------------
# acceptance reporting: tests/test_acceptance.py records one line per
# criterion; the summary hook prints them all at the end of the run.

ACCEPTANCE_RESULTS = []


def record_acceptance(number: int, label: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((number, label, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:02d} {label}: {detail}")
