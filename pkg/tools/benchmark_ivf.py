#!/usr/bin/env python3

"""
trajlet - IVF Benchmark

Standalone utility to measure IVF index build time, memory, query latency
and recall against the exact scan, over a saved bank or a synthetic
clustered one.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import gc
import os
import time
from typing import List, Optional, Sequence, Tuple

import click
import numpy as np
import psutil

from trajlet.core import NormalizedTrajectory
from trajlet.retrieval import (
    EmbeddingBank, build_ivf, load_bank, search_exact, search_ivf,
)


def format_bytes(bytes_val: float) -> str:
    """
    Format bytes as human-readable string.
    """

    for unit in ['B', 'KB', 'MB', 'GB']:
        if abs(bytes_val) < 1024.0:
            return f"{bytes_val:.2f} {unit}"
        bytes_val /= 1024.0
    return f"{bytes_val:.2f} TB"


def clustered_bank(size: int, dim: int, clusters: int, seed: int) -> EmbeddingBank:
    """
    Unit vectors scattered around ``clusters`` random centers.
    """

    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(clusters, dim))
    rows = centers[rng.integers(clusters, size=size)]
    rows = rows + rng.normal(0.0, 0.25, size=(size, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)

    stub = NormalizedTrajectory(np.array([[0.0, 0.0], [1.0, 0.0]]))
    return EmbeddingBank([f"v{i:07d}" for i in range(size)], rows, [stub] * size)


def timed_search(search, queries: np.ndarray) -> Tuple[float, List[set]]:
    start = time.perf_counter()
    found = [set(search(q).ids) for q in queries]
    return time.perf_counter() - start, found


def benchmark(
        bank: EmbeddingBank,
        nlist: int,
        nprobes: Sequence[int],
        query_count: int,
        k: int,
        seed: int) -> None:

    process = psutil.Process(os.getpid())
    rng = np.random.default_rng(seed + 1)
    picks = rng.choice(len(bank), size=min(query_count, len(bank)), replace=False)
    queries = bank.embeddings[picks]

    gc.collect()
    mem_before = process.memory_info().rss
    start = time.perf_counter()
    index = build_ivf(bank, nlist, seed=seed)
    build_time = time.perf_counter() - start
    mem_after = process.memory_info().rss

    sizes = [len(members) for members in index.lists]
    click.echo(f"Built {nlist} lists in {build_time:.3f}s,"
               f" {format_bytes(mem_after - mem_before)}")
    click.echo(f"List sizes: min {min(sizes)}, max {max(sizes)},"
               f" mean {np.mean(sizes):.1f}")
    click.echo()

    exact_time, exact = timed_search(lambda q: search_exact(bank, q, k), queries)

    click.echo(f"{'Search':<12} {'Recall@' + str(k):<12} {'Total (s)':<12} {'Per Query (ms)':<16}")
    click.echo("-" * 56)
    click.echo(f"{'exact':<12} {1.0:<12.4f} {exact_time:<12.3f}"
               f" {1000 * exact_time / len(queries):<16.3f}")

    for nprobe in nprobes:
        if nprobe > nlist:
            continue
        elapsed, found = timed_search(
            lambda q: search_ivf(index, bank, q, k, nprobe), queries)
        hits = sum(len(e & f) for e, f in zip(exact, found))
        recall = hits / (k * len(queries))
        click.echo(f"{'nprobe ' + str(nprobe):<12} {recall:<12.4f} {elapsed:<12.3f}"
                   f" {1000 * elapsed / len(queries):<16.3f}")

    click.echo("-" * 56)


@click.command()
@click.option(
    '--bank', '-b', 'bank_dir', default=None,
    help="Bank directory to benchmark instead of a synthetic bank")
@click.option('--size', '-n', default=10000, type=int, help="Synthetic bank rows (default: 10000)")
@click.option('--dim', default=16, type=int, help="Synthetic embedding size (default: 16)")
@click.option('--clusters', default=100, type=int, help="Synthetic cluster count (default: 100)")
@click.option('--nlist', default=32, type=int, help="IVF lists (default: 32)")
@click.option(
    '--nprobe', 'nprobes', multiple=True, type=int,
    help="Probe counts to measure; repeatable (default: 1 2 4 8 16 32)")
@click.option('--queries', '-q', 'query_count', default=200, type=int,
              help="Queries drawn from the bank (default: 200)")
@click.option('-k', 'k', default=6, type=int, help="Neighbors per query (default: 6)")
@click.option('--seed', default=0, type=int, help="Seed of the data and k-means (default: 0)")
def main(
        bank_dir: Optional[str],
        size: int,
        dim: int,
        clusters: int,
        nlist: int,
        nprobes: Tuple[int, ...],
        query_count: int,
        k: int,
        seed: int):
    """
    Benchmark IVF retrieval against the exact scan.
    """

    if bank_dir:
        bank = load_bank(bank_dir)
        click.echo(f"Bank: {bank_dir}")
    else:
        bank = clustered_bank(size, dim, clusters, seed)
        click.echo(f"Synthetic bank, {clusters} clusters")

    click.echo(f"Rows: {len(bank)}, d_emb: {bank.d_emb}")
    click.echo()

    benchmark(bank, nlist, nprobes or (1, 2, 4, 8, 16, 32), query_count, k, seed)


if __name__ == '__main__':
    main()


# The end.
