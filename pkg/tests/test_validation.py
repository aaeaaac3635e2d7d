import pytest

from cranalloc.validation import SUITES, run_suite


@pytest.mark.parametrize("name,seeds", [("closed-forms", 10), ("subgradients", 10),
                                        ("duality", 1), ("baselines", 1)])
def test_suite_passes(name, seeds):
    results = run_suite(name, seeds)
    assert results
    failed = [(n, d) for n, ok, d in results if not ok]
    assert not failed


@pytest.mark.slow
def test_feasibility_suite():
    assert all(ok for _, ok, _ in run_suite("feasibility", 1))


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_suites_registered():
    assert set(SUITES) == {"closed-forms", "subgradients", "duality", "feasibility", "baselines"}
