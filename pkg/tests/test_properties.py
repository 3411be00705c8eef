import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from invariants import check_action_sequence, check_random_plan, random_instance, random_state

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=10_000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=seeds, choices=st.lists(st.integers(min_value=0, max_value=63), min_size=1, max_size=12))
def test_random_action_sequences(seed, choices):
    state = random_state(np.random.default_rng(seed))
    check_action_sequence(state, choices)


@settings(max_examples=1_000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=seeds)
def test_random_plans(seed):
    rng = np.random.default_rng(seed)
    check_random_plan(random_instance(rng), rng)
