import gzip
import json

import numpy as np
import pytest

from gridcascade.cascade import Policy
from gridcascade.sampler import (
    PoolConfig,
    admissible_pairs,
    generate_pool,
    load_pool,
    pool_statistics,
    save_pool,
)


def test_all_pairs_admissible_on_ieee30(case):
    pairs = admissible_pairs(case)
    assert len(pairs) == 41 * 40 // 2  # every N-2 pair keeps some gen+load island
    assert all(a < b for a, b in pairs)


def test_pool_determinism(case):
    config = PoolConfig(n_samples=20, loading_multipliers=(1.4,), policy=Policy.EXP1, seed=5)
    a = generate_pool(case, config)
    b = generate_pool(case, config)
    assert [t.to_dict() for t in a.traces] == [t.to_dict() for t in b.traces]
    assert a.train_idx == b.train_idx


def test_seed_changes_pool(case):
    base = PoolConfig(n_samples=20, loading_multipliers=(1.4,), policy=Policy.EXP1, seed=5)
    other = PoolConfig(n_samples=20, loading_multipliers=(1.4,), policy=Policy.EXP1, seed=6)
    a = generate_pool(case, base)
    b = generate_pool(case, other)
    assert [t.to_dict() for t in a.traces] != [t.to_dict() for t in b.traces]


def test_distinct_pairs_exhaustive(case):
    config = PoolConfig(
        n_samples=820, loading_multipliers=(1.0,), policy=Policy.EXP3, seed=1, distinct_pairs=True
    )
    pool = generate_pool(case, config)
    seen = {tuple(sorted(t.profile.initial_contingencies)) for t in pool.traces}
    assert len(seen) == 820


def test_distinct_pairs_overflow_rejected(case):
    config = PoolConfig(
        n_samples=821, loading_multipliers=(1.0,), policy=Policy.EXP3, seed=1, distinct_pairs=True
    )
    with pytest.raises(ValueError):
        generate_pool(case, config)


def test_split_disjoint_and_sized(small_pool):
    train, test = set(small_pool.train_idx), set(small_pool.test_idx)
    assert not train & test
    assert len(train) + len(test) == len(small_pool.traces)
    assert len(train) == round(0.7 * len(small_pool.traces))


def test_wind_raised_to_reduction(case):
    config = PoolConfig(
        n_samples=15,
        loading_multipliers=(1.2,),
        wind_fraction=0.0,
        wind_reductions=(0.2, 0.6),
        policy=Policy.EXP1,
        seed=9,
    )
    pool = generate_pool(case, config)
    for tr in pool.traces:
        assert tr.profile.wind_fraction == pytest.approx(tr.profile.wind_reduction)
        assert tr.profile.wind_reduction in (0.2, 0.6)


def test_save_load_roundtrip(tmp_path, small_pool):
    for name in ("pool.jsonl", "pool.jsonl.gz"):
        path = tmp_path / name
        save_pool(small_pool, path)
        again = load_pool(path)
        assert again.config == small_pool.config
        assert again.train_idx == small_pool.train_idx
        assert [t.to_dict() for t in again.traces] == [t.to_dict() for t in small_pool.traces]


def test_gzip_actually_compressed(tmp_path, small_pool):
    path = tmp_path / "pool.jsonl.gz"
    save_pool(small_pool, path)
    with gzip.open(path, "rt") as fh:
        header = json.loads(fh.readline())
    assert header["schema_version"] == 1


def test_load_rejects_bad_schema(tmp_path, small_pool):
    path = tmp_path / "pool.jsonl"
    save_pool(small_pool, path)
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["schema_version"] = 99
    path.write_text("\n".join([json.dumps(header)] + lines[1:]))
    with pytest.raises(ValueError):
        load_pool(path)


def test_pool_statistics(small_pool):
    stats = pool_statistics(small_pool)
    assert stats["n_traces"] == len(small_pool.traces)
    freq = np.array(stats["branch_failure_frequency"])
    post = np.array(stats["branch_post_initial_failure_frequency"])
    assert ((0 <= freq) & (freq <= 1)).all()
    assert (post <= freq + 1e-12).all()
    assert stats["mean_trace_length"] >= 1.0


def test_loading_choice_uniformity(case):
    """Sampled loadings hit each configured level roughly uniformly."""
    config = PoolConfig(
        n_samples=400, loading_multipliers=(0.9, 1.2, 1.5), policy=Policy.EXP3, seed=17
    )
    pool = generate_pool(case, config)
    counts = {c: 0 for c in config.loading_multipliers}
    for tr in pool.traces:
        counts[tr.profile.loading_multiplier] += 1
    for c, k in counts.items():
        assert 90 <= k <= 180  # ~7 sigma around 133
