"""Bounded exploration sanity at a small depth.

The full-depth run is part of the acceptance suite; this one keeps the
machinery honest on every test run without the cost.
"""

from safekeeper.modelcheck import run_model_check


def test_small_bound_holds():
    result = run_model_check(enclave_count=3, max_depth=4, seed=7)
    assert result.ok, result.violations
    # the walk actually went somewhere
    assert result.states_explored > 100
    assert result.transitions >= result.states_explored - 1
    assert result.max_depth == 4


def test_seed_changes_nothing_semantically():
    a = run_model_check(enclave_count=2, max_depth=4, seed=1)
    b = run_model_check(enclave_count=2, max_depth=4, seed=2)
    assert a.ok and b.ok
    # same protocol, same reachable state count regardless of key material
    assert a.states_explored == b.states_explored
