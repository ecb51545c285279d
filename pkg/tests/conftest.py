from __future__ import annotations

import functools

import pytest

from rlqdag import Dag, ExpansionConfig, bundled_queries, expand, parse_query, parse_term, query_catalog

SIGMA = parse_term(
    "(fix X (rel isLocatedIn)"
    " (antiproject m (join (rename t m (rel isLocatedIn)) (rename s m (var X)))))"
)
SIGMA_REV = parse_term(
    "(fix X (rel isLocatedIn)"
    " (antiproject m (join (rename s m (rel isLocatedIn)) (rename t m (var X)))))"
)
EDGE_CATALOG = {"isLocatedIn": frozenset({"s", "t"}), "dealsWith": frozenset({"s", "t"})}


@functools.lru_cache(maxsize=None)
def expanded(name: str):
    """Fully expanded DAG of a bundled query, shared across tests."""
    text = dict(bundled_queries())[name]
    term = parse_query(text)
    catalog = query_catalog(term)
    dag = Dag(catalog)
    root = dag.add_term(term)
    res = expand(dag, root, ExpansionConfig())
    return term, catalog, dag, res


@pytest.fixture
def sigma():
    return SIGMA


@pytest.fixture
def catalog():
    return dict(EDGE_CATALOG)


BUNDLED = [name for name, _ in bundled_queries()]


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
