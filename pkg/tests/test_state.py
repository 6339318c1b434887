import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gelsim.kernel import mixed_kernel, product_kernel, sum_kernel
from gelsim.state import init_from_profile, init_monodisperse


def test_init_monodisperse_examples():
    s = init_monodisperse(5)
    assert s.counts == {1: 5}
    assert s.particle_count == 5
    assert init_monodisperse(1).counts == {1: 1}
    assert init_monodisperse(2).counts == {1: 2}
    with pytest.raises(ValueError):
        init_monodisperse(0)


def test_init_from_profile_examples():
    s = init_from_profile({1: 2, 3: 1})
    assert s.N == 5 and s.particle_count == 3
    s = init_from_profile({4: 1})
    assert s.N == 4 and s.particle_count == 1
    assert init_from_profile({2: 3}).N == 6
    with pytest.raises(ValueError):
        init_from_profile({})
    with pytest.raises(ValueError):
        init_from_profile({2: -1})


def test_apply_coagulation_examples():
    s = init_monodisperse(2)
    s.apply_coagulation(1, 1)
    assert s.counts == {2: 1}

    s = init_from_profile({1: 1, 2: 1})
    s.apply_coagulation(1, 2)
    assert s.counts == {3: 1}

    s = init_monodisperse(3)
    s.apply_coagulation(1, 1)
    assert s.counts == {1: 1, 2: 1}
    assert s.particle_count == 2


def test_apply_coagulation_precondition_is_logic_error():
    s = init_monodisperse(3)
    with pytest.raises(RuntimeError):
        s.apply_coagulation(1, 2)  # no size-2 cluster yet
    with pytest.raises(RuntimeError):
        init_from_profile({2: 1, 3: 1}).apply_coagulation(2, 2)


def test_mass_tail_examples():
    s = init_from_profile({1: 2, 3: 1})
    assert s.mass_tail(2) == pytest.approx(0.6)
    assert s.mass_tail(1) == 1.0
    assert init_from_profile({4: 1}).mass_tail(5) == 0.0


def test_moment_tail_examples():
    assert init_from_profile({2: 1}).moment_tail(2, 1) == pytest.approx(2.0)
    assert init_monodisperse(4).moment_tail(3, 2) == 0.0
    assert init_from_profile({1: 1, 3: 1}).moment_tail(2, 1) == pytest.approx(2.5)


@st.composite
def profiles(draw):
    sizes = draw(st.lists(st.integers(1, 12), min_size=1, max_size=6, unique=True))
    return {s: draw(st.integers(1, 8)) for s in sizes}


@given(profile=profiles(), data=st.data())
@settings(max_examples=100, deadline=None)
def test_random_event_sequences_conserve_mass(profile, data):
    s = init_from_profile(profile)
    N, K0 = s.N, s.particle_count
    events = 0
    while s.particle_count > 1 and events < 20:
        choices = [m for m, c in s.counts.items() for _ in range(min(c, 2))]
        m = data.draw(st.sampled_from(sorted(set(choices))))
        partners = [n for n, c in s.counts.items() if (n != m and c >= 1) or (n == m and c >= 2)]
        if not partners:
            break
        n = data.draw(st.sampled_from(sorted(partners)))
        s.apply_coagulation(m, n)
        events += 1
        assert sum(sz * c for sz, c in s.counts.items()) == N
        assert s.particle_count == K0 - events
        assert all(c > 0 for c in s.counts.values())


@given(profile=profiles(), k1=st.integers(1, 15), k2=st.integers(1, 15))
@settings(max_examples=100)
def test_mass_tail_monotone_and_matches_moment(profile, k1, k2):
    s = init_from_profile(profile)
    lo, hi = min(k1, k2), max(k1, k2)
    assert s.mass_tail(lo) >= s.mass_tail(hi)
    assert s.moment_tail(1, lo) == pytest.approx(s.mass_tail(lo), abs=1e-12)


@pytest.mark.parametrize("spec", [product_kernel(1.0), sum_kernel(1.5), mixed_kernel(1.5)])
def test_weight_index_survives_1e5_events(spec):
    # 10^5 incremental updates without a rebuild must stay within 1e-9
    # relative of a fresh recomputation
    rng = np.random.default_rng(5)
    events = 100_000
    s = init_monodisperse(events + 1)
    s.attach_kernel(spec)
    p = spec.core_param
    pool = [1] * (events + 1)  # live cluster sizes, multiplicity included
    draws = rng.integers(0, 1 << 62, size=2 * events)
    for i in range(events):
        ia = int(draws[2 * i] % len(pool))
        m = pool[ia]
        pool[ia] = pool[-1]
        pool.pop()
        ib = int(draws[2 * i + 1] % len(pool))
        n = pool[ib]
        pool[ib] = m + n
        s.apply_coagulation(m, n)
    assert s._updates == 3 * events  # no rebuild happened yet
    direct = sum(sz**p * c for sz, c in s.counts.items())
    assert s.weight_total() == pytest.approx(direct, rel=1e-9)


def test_serialization():
    s = init_from_profile({1: 2, 3: 1})
    rows = list(s.to_csv_rows(0.5))
    assert rows == ["0.5,1,2", "0.5,3,1"]
    obj = json.loads(s.to_json(1.25))
    assert obj == {"t": 1.25, "counts": {"1": 2, "3": 1}}
