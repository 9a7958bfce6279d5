"""Index-ordered parallel map for independent trials."""
import os
from concurrent.futures import ThreadPoolExecutor


def default_threads() -> int:
    env = os.environ.get("SHADOWNET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """[fn(x) for x in items], fanned out over threads, merged by index.

    Each item must carry its own seed so results do not depend on scheduling.
    """
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
