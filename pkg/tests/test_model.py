import numpy as np
import pytest
from hypothesis import given, strategies as st

from disg.errors import (
    DimensionMismatch,
    InvalidBelief,
    NegativeEntry,
    NonStochasticRow,
    SignalActionMismatch,
    ZeroLikelihood,
)
from disg.model import (
    EPSILON,
    REFERENCE_TRANSITION,
    MarkovModel,
    as_belief,
    belief_update,
    bsc_channel,
    conditional_entropy,
    conditional_mutual_information,
    conditional_mutual_information_batch,
    joint_distribution,
    reference_model,
    pathwise_log_ratio,
    sample_index,
    signal_likelihood,
)
from oracles import cmi_bruteforce, filter_step
from strategies import beliefs, models

# enumeration oracle, tests/oracles.py
MI_UNIFORM_P06 = 0.02789494154053318
MI_030_P06 = 0.023603021370914412
MI_UNIFORM_P065_OWN = 0.026450994113070836

FLAT = np.array([[0.5, 0.5], [0.5, 0.5]])


def test_reference_model_is_valid(model):
    assert model.num_states == 2
    np.testing.assert_array_equal(model.transition, [[0.8, 0.2], [0.15, 0.85]])
    np.testing.assert_array_equal(model.channel(1), [[0.6, 0.4], [0.4, 0.6]])


def test_identity_model_is_valid():
    eye = np.eye(3)
    MarkovModel(eye, (eye, eye))


def test_non_stochastic_row_reports_row():
    with pytest.raises(NonStochasticRow) as info:
        MarkovModel(np.array([[0.8, 0.3], [0.15, 0.85]]), (bsc_channel(0.6),) * 2)
    assert info.value.where[1] == 0


def test_negative_entry():
    with pytest.raises(NegativeEntry):
        MarkovModel(np.array([[1.2, -0.2], [0.15, 0.85]]), (bsc_channel(0.6),) * 2)


def test_channel_rows_must_match_states():
    with pytest.raises(DimensionMismatch):
        MarkovModel(REFERENCE_TRANSITION, (np.eye(3), bsc_channel(0.6)))


def test_invalid_beliefs():
    with pytest.raises(InvalidBelief):
        as_belief([0.5, 0.6])
    with pytest.raises(InvalidBelief):
        as_belief([1.2, -0.2])
    with pytest.raises(DimensionMismatch):
        as_belief([0.5, 0.5], num_states=3)


def test_models_hash_by_value():
    assert reference_model() == reference_model()
    assert hash(reference_model()) == hash(reference_model())
    assert reference_model(0.65, 0.6) != reference_model()


class TestSignalLikelihood:
    def test_epsilon_without_sharing(self, model):
        assert signal_likelihood(model, 0, EPSILON, 0, agent=1) == 1.0

    def test_observation_when_shared(self, model):
        assert signal_likelihood(model, 0, 0, 1, agent=1) == pytest.approx(0.6)

    def test_observation_without_sharing_is_impossible(self, model):
        assert signal_likelihood(model, 0, 0, 0, agent=1) == 0.0

    def test_epsilon_with_sharing_is_impossible(self, model):
        assert signal_likelihood(model, 0, EPSILON, 1, agent=1) == 0.0

    def test_uses_other_agents_channel(self):
        m = reference_model(0.9, 0.6)
        assert signal_likelihood(m, 0, 0, 1, agent=1) == pytest.approx(0.6)
        assert signal_likelihood(m, 0, 0, 1, agent=2) == pytest.approx(0.9)


class TestBeliefUpdate:
    def test_hand_computed_step(self, model):
        out = belief_update(model, [0.5, 0.5], 0, EPSILON, 0, agent=1)
        np.testing.assert_allclose(out, [0.54, 0.46], atol=1e-15)

    def test_matches_scalar_oracle_with_signal(self, model):
        out = belief_update(model, [0.3, 0.7], 1, 0, 1, agent=1)
        ref = filter_step([list(r) for r in REFERENCE_TRANSITION], [[0.6, 0.4], [0.4, 0.6]], [[0.6, 0.4], [0.4, 0.6]], [0.3, 0.7], 1, 0)
        np.testing.assert_allclose(out, ref, atol=1e-15)

    def test_vertex_with_flat_channels_reads_kernel_row(self):
        m = MarkovModel(REFERENCE_TRANSITION, (FLAT, FLAT))
        np.testing.assert_allclose(belief_update(m, [1.0, 0.0], 1, EPSILON, 0, agent=2), [0.8, 0.2])

    def test_signal_action_mismatch(self, model):
        with pytest.raises(SignalActionMismatch):
            belief_update(model, [0.5, 0.5], 0, EPSILON, 1, agent=1)
        with pytest.raises(SignalActionMismatch):
            belief_update(model, [0.5, 0.5], 0, 1, 0, agent=1)

    def test_zero_likelihood_is_an_error(self):
        m = MarkovModel(REFERENCE_TRANSITION, (np.eye(2), np.eye(2)))
        with pytest.raises(ZeroLikelihood):
            belief_update(m, [1.0, 0.0], 1, EPSILON, 0, agent=1)

    @given(models(), st.data())
    def test_output_is_a_belief(self, m, data):
        b = data.draw(beliefs(m.num_states))
        y = data.draw(st.integers(0, m.num_obs(1) - 1))
        z = data.draw(st.one_of(st.none(), st.integers(0, m.num_obs(2) - 1)))
        out = belief_update(m, b, y, z, int(z is not None), agent=1)
        assert np.all(out >= 0)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(0.0, 1.0), st.integers(0, 1))
    def test_flat_channels_only_predict(self, q, y):
        m = MarkovModel(REFERENCE_TRANSITION, (FLAT, FLAT))
        b = np.array([q, 1 - q])
        np.testing.assert_allclose(belief_update(m, b, y, EPSILON, 0, agent=1), b @ np.array(REFERENCE_TRANSITION), atol=1e-15)


class TestMutualInformation:
    def test_uniform_reference_value(self, model):
        assert conditional_mutual_information(model, [0.5, 0.5], 1) == pytest.approx(MI_UNIFORM_P06, abs=1e-15)

    def test_off_center_reference_value(self, model):
        assert conditional_mutual_information(model, [0.3, 0.7], 2) == pytest.approx(MI_030_P06, abs=1e-15)

    def test_asymmetric_channels(self):
        m = reference_model(0.65, 0.6)
        assert conditional_mutual_information(m, [0.5, 0.5], 1) == pytest.approx(MI_UNIFORM_P065_OWN, abs=1e-15)

    def test_flat_opponent_channel_gives_zero(self):
        m = MarkovModel(REFERENCE_TRANSITION, (bsc_channel(0.6), FLAT))
        assert conditional_mutual_information(m, [0.3, 0.7], 1) == 0.0

    def test_vertex_gives_zero(self, model):
        assert conditional_mutual_information(model, [1.0, 0.0], 1) == 0.0
        assert conditional_mutual_information(model, [0.0, 1.0], 2) == 0.0

    @given(models(), st.data())
    def test_bounds_and_oracle(self, m, data):
        b = data.draw(beliefs(m.num_states))
        mi = conditional_mutual_information(m, b, 1)
        assert 0.0 <= mi <= np.log2(m.num_states) + 1e-12
        ref = cmi_bruteforce(None, m.channel(1).tolist(), m.channel(2).tolist(), b.tolist())
        assert mi == pytest.approx(ref, abs=1e-12)

    @given(models(), st.data())
    def test_chain_rule_form(self, m, data):
        b = data.draw(beliefs(m.num_states))
        joint = joint_distribution(m, b, 2)
        h_own = conditional_entropy(joint.sum(axis=2), target_axis=0)
        h_both = conditional_entropy(joint, target_axis=0)
        assert h_own - h_both == pytest.approx(conditional_mutual_information(m, b, 2), abs=1e-12)

    def test_batch_matches_scalar(self, model, rng):
        qs = rng.random(25)
        batch = conditional_mutual_information_batch(model, np.stack([qs, 1 - qs], axis=1), 1)
        for q, v in zip(qs, batch):
            assert v == conditional_mutual_information(model, [q, 1 - q], 1)

    def test_pathwise_ratio_averages_to_gain(self, model):
        b = np.array([0.35, 0.65])
        joint = joint_distribution(model, b, 1)
        avg = sum(p * pathwise_log_ratio(model, b, x, y, z, 1, 1) for (x, y, z), p in np.ndenumerate(joint))
        assert avg == pytest.approx(conditional_mutual_information(model, b, 1), abs=1e-14)


@given(st.floats(0.0, 0.999999))
def test_sample_index_inverts_cdf(u):
    probs = [0.2, 0.5, 0.3]
    i = sample_index(probs, u)
    cdf = np.cumsum(probs)
    assert (i == 0 or u >= cdf[i - 1] - 1e-12) and u < cdf[i] + 1e-12
