import math

import numpy as np
import pytest

from ldml import (AlgoConfig, ConfigError, DataError, DataSet, Hypothesis,
                  HypothesisList, Learners, LearnerProfile, psi, rng_stream)
from ldml.outer import (CandidateSetCollection, OuterConfig, gamma,
                        gamma_prime, outer_stage, resolve_outer_config,
                        shells)

PROFILE = LearnerProfile()


def _cfg(**kw):
    kw.setdefault("w_low", 0.1)
    return AlgoConfig(**kw)


def _learners(kld):
    return Learners(profile=PROFILE, kld=kld,
                    rme=lambda S, a, r: S.points.mean(axis=0))


# ---------------------------------------------------------------------------
# radii
# ---------------------------------------------------------------------------

def test_gamma_hand_value():
    # w_low=0.1: psi(4, 1e-4) = sqrt(4) * 10 = 20, so gamma = 4 * 20 = 80
    assert abs(gamma(_cfg(), PROFILE) - 80.0) < 1e-12


def test_gamma_prime_hand_value():
    # w_low=0.1: alpha = 0.025, f = 3 psi, so gamma' = (160 + 16*3) psi
    expect = 208.0 * psi(4, 0.025)
    assert abs(gamma_prime(_cfg(), PROFILE) - expect) < 1e-12


def test_resolve_outer_config():
    ocfg = resolve_outer_config(_cfg(), PROFILE, 5000)
    assert ocfg.gamma == gamma(_cfg(), PROFILE)
    assert ocfg.floor == 100.0 * 0.1**4 * 5000
    with pytest.raises(ConfigError):
        OuterConfig(gamma=0.0, gamma_prime=1.0, floor=1.0)


# ---------------------------------------------------------------------------
# shells
# ---------------------------------------------------------------------------

def test_shells_single_hypothesis_is_everything():
    X = rng_stream(0, "sh").standard_normal((50, 3)) * 100.0
    ocfg = OuterConfig(gamma=1.0, gamma_prime=1.0, floor=1.0)
    s1, s2 = shells(0, np.zeros((1, 3)), np.ones(50, dtype=bool), X, ocfg)
    assert s1.all() and s2.all()


def test_shells_boundaries():
    # two hypotheses along e1; r1 = 2.  A point exactly at projection 2 is
    # in S1 (closed boundary); a point at projection 4 is in S2 only.
    means = np.array([[0.0, 0.0], [10.0, 0.0]])
    X = np.array([[2.0, 5.0], [4.0, -3.0], [7.0, 0.0]])
    ocfg = OuterConfig(gamma=1.0, gamma_prime=1.0, floor=1.0)
    s1, s2 = shells(0, means, np.ones(3, dtype=bool), X, ocfg)
    assert s1.tolist() == [True, False, False]
    assert s2.tolist() == [True, True, False]
    # nesting holds by construction
    assert not (s1 & ~s2).any()


def test_shells_respects_live_mask():
    means = np.array([[0.0], [10.0]])
    X = np.array([[0.0], [1.0]])
    ocfg = OuterConfig(gamma=1.0, gamma_prime=1.0, floor=1.0)
    live = np.array([True, False])
    s1, _ = shells(0, means, live, X, ocfg)
    assert s1.tolist() == [True, False]


# ---------------------------------------------------------------------------
# outer_stage
# ---------------------------------------------------------------------------

def test_outer_single_hypothesis_one_set():
    # one hypothesis has no slab constraints, so S1 = S2 = everything and
    # the single emitted set is all of S with origin 0
    X = rng_stream(0, "os1").standard_normal((200, 3))
    kld = lambda S, a, r: HypothesisList((Hypothesis(np.zeros(3), a),))
    coll = outer_stage(DataSet(X), _learners(kld), _cfg(), rng_stream(0, "os1r"))
    assert len(coll) == 1
    assert coll.origins == (0,)
    assert np.array_equal(coll.sets[0], np.arange(200))


def test_outer_empty_learner_fallback():
    X = rng_stream(0, "os2").standard_normal((200, 3))
    kld = lambda S, a, r: HypothesisList()
    coll = outer_stage(DataSet(X), _learners(kld), _cfg(), rng_stream(0, "os2r"))
    assert len(coll) == 1
    assert coll.origins == (-1,)
    assert np.array_equal(coll.sets[0], np.arange(200))


def test_outer_two_point_masses_disjoint_sets():
    # shrink the radii (r1 ~ 4.1) far below the separation 50 so each mass
    # gets its own pure candidate set
    cfg = _cfg(c_gamma=0.1, c_gammaprime_psi=0.5, c_gammaprime_f=0.1)
    rng = rng_stream(0, "os3")
    a = rng.standard_normal((300, 4)) * 0.2
    a[:, 0] += 25.0
    b = rng.standard_normal((300, 4)) * 0.2
    b[:, 0] -= 25.0
    X = np.vstack([a, b])
    hyps = HypothesisList((Hypothesis(np.array([25.0, 0, 0, 0]), 0.1),
                           Hypothesis(np.array([-25.0, 0, 0, 0]), 0.1)))
    kld = lambda S, a_, r: hyps
    coll = outer_stage(DataSet(X), _learners(kld), cfg, rng_stream(0, "os3r"))
    assert len(coll) == 2
    assert sorted(coll.origins) == [0, 1]
    joined = np.concatenate(coll.sets)
    assert len(np.unique(joined)) == len(joined)        # disjoint
    for idx, origin in zip(coll.sets, coll.origins):
        side = np.sign(X[idx, 0])
        want = 1.0 if origin == 0 else -1.0
        assert np.all(side == want)                      # pure


def test_outer_budget_bound():
    # emitted outer shells are supersets of the removed inner shells; with
    # |S2| <= 2|S1| each emission, total indices <= 2n plus one residual
    cfg = _cfg(c_gamma=0.1, c_gammaprime_psi=0.5, c_gammaprime_f=0.1)
    rng = rng_stream(1, "os4")
    X = np.vstack([rng.standard_normal((200, 3)) + off
                   for off in (0.0, 40.0, -40.0)])
    hyps = HypothesisList(tuple(
        Hypothesis(np.full(3, off), 0.1) for off in (0.0, 40.0, -40.0)))
    coll = outer_stage(DataSet(X), _learners(lambda S, a, r: hyps), cfg,
                       rng_stream(1, "os4r"))
    assert sum(len(s) for s in coll.sets) <= 3 * X.shape[0]


def test_outer_needs_enough_samples():
    with pytest.raises(DataError):
        outer_stage(DataSet(np.zeros((5, 2))),
                    _learners(lambda S, a, r: HypothesisList()),
                    _cfg(), rng_stream(0, "e"))


def test_candidate_collection_validation():
    with pytest.raises(ConfigError):
        CandidateSetCollection((np.arange(3),), (0, 1))
    with pytest.raises(DataError):
        CandidateSetCollection((np.arange(0),), (0,))
