"""Deterministic desk-scale knowledge graph for the bundled queries.

``python3 -m rlqdag.datagen OUT_DIR`` writes ``desk_graph.tsv`` and
``desk_stats.json``.  The graph is a place hierarchy (``isLocatedIn``) with
``Sweden`` among the countries, trade links between countries
(``dealsWith``), family trees (``hasChild``), residences (``livesIn``),
company ownership (``owns``), the ``a``/``b``/``p`` relations of the builtins
and chain labels ``a1`` … ``a6`` for the scalability family.
"""
from __future__ import annotations

import argparse
import random
from pathlib import Path

from .evaluator import load_edges, save_stats

COUNTRIES = 30
REGIONS_PER_COUNTRY = 8
CITIES_PER_REGION = 6
PEOPLE = 2500
COMPANIES = 300
CHAIN_LABELS = 6


def generate(seed: int = 7, scale: float = 1.0) -> list:
    """Sorted, duplicate-free (source, label, target) triples."""
    rng = random.Random(seed)
    n = lambda k: max(1, int(k * scale))  # noqa: E731
    edges = set()

    countries = ["Sweden"] + [f"country{i}" for i in range(1, n(COUNTRIES))]
    places = list(countries)
    cities = []
    for c in countries:
        edges.add((c, "isLocatedIn", "Europe" if rng.random() < 0.5 else "Asia"))
        for r in range(n(REGIONS_PER_COUNTRY)):
            region = f"{c}_r{r}"
            edges.add((region, "isLocatedIn", c))
            places.append(region)
            for k in range(n(CITIES_PER_REGION)):
                city = f"{region}_c{k}"
                edges.add((city, "isLocatedIn", region))
                cities.append(city)
    for c in countries:
        for d in rng.sample(countries, 3):
            if d != c:
                edges.add((c, "dealsWith", d))

    people = [f"person{i}" for i in range(n(PEOPLE))]
    for i, person in enumerate(people):
        edges.add((person, "livesIn", rng.choice(cities)))
        if i >= 50:
            # parents come earlier in the list, so family trees stay acyclic
            edges.add((people[rng.randrange(max(1, i - 400), i)], "hasChild", person))
    for i in range(n(COMPANIES)):
        company = f"company{i}"
        edges.add((rng.choice(people), "owns", company))
        edges.add((company, "isLocatedIn", rng.choice(cities)))

    for rel in ("a", "b", "p"):
        pool = [f"{rel}n{i}" for i in range(n(150))]
        for _ in range(n(300)):
            edges.add((rng.choice(pool), rel, rng.choice(pool)))

    hubs = [f"h{i}" for i in range(n(200))]
    for j in range(1, CHAIN_LABELS + 1):
        for _ in range(n(250)):
            edges.add((rng.choice(hubs), f"a{j}", rng.choice(hubs)))
    return sorted(edges)


def write_tsv(edges, path) -> None:
    lines = ["# source\tlabel\ttarget"] + ["\t".join(e) for e in edges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python3 -m rlqdag.datagen", description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    graph = args.out_dir / "desk_graph.tsv"
    write_tsv(generate(args.seed, args.scale), graph)
    save_stats(load_edges(graph), args.out_dir / "desk_stats.json")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
