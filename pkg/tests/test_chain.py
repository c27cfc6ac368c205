"""Tests for the Metropolis-Hastings tree search"""

import math

import numpy as np
import pytest
from scipy import integrate

from conftest import make_dataset

from claimcart.core.params import GammaPriorPair, NodeParams
from claimcart.core.tree import Grow, Tree, apply_structural_edit
from claimcart.data.simulate import ScenarioConfig, simulate_scenario
from claimcart.models import FamilyKind, make_family
from claimcart.search.chain import ArchiveEntry, ChainConfig, TreeSampler, run, step, subtree_leaves
from claimcart.search.moves import MoveType, Proposal, ProposalMix, propose
from claimcart.search.prior import TreePriorConfig
from claimcart.search.trace import TraceBuffer

SMALL_PRIOR = TreePriorConfig(gamma=0.95, rho=2.0, numeric_grid_size=20, min_node_size=10)


def small_config(**overrides) -> ChainConfig:
    values = dict(iterations=60, burn_in=10, restarts=2, prior=SMALL_PRIOR, seed=5)
    values.update(overrides)
    return ChainConfig(**values)


class TestConfig:
    def test_family_is_coerced(self):
        assert small_config(family="zip2").family is FamilyKind.ZIP2

    @pytest.mark.parametrize("overrides", [dict(iterations=0), dict(burn_in=60), dict(restarts=0), dict(workers=0)])
    def test_invalid_values(self, overrides):
        with pytest.raises(ValueError):
            small_config(**overrides)


class TestDeterminism:
    @pytest.mark.parametrize("family", ["poisson", "zip1"])
    def test_same_seed_same_trace(self, scenario1, family):
        first = run(small_config(family=family), scenario1)
        second = run(small_config(family=family), scenario1)
        assert first.trace == second.trace
        assert [e.log_data_lik for e in first.archive] == [e.log_data_lik for e in second.archive]

    def test_restarts_use_separate_streams(self, scenario1):
        result = run(small_config(restarts=2), scenario1)
        by_restart = [[r.move for r in result.trace if r.restart == k] for k in (0, 1)]
        assert by_restart[0] != by_restart[1]


class TestAcceptance:
    @pytest.mark.parametrize("family", ["poisson", "nb1", "zip2"])
    def test_incremental_difference_matches_full_evaluation(self, scenario1, family):
        sampler = TreeSampler(small_config(family=family), scenario1)
        state = sampler.initial_state(0)
        rng = np.random.default_rng(99)
        compared = 0
        for _ in range(60):
            _, proposal = propose(state.tree, sampler.config.proposal_mix, sampler.candidates, rng)
            if proposal is not None:
                old = subtree_leaves(state.tree.node(proposal.path))
                new = subtree_leaves(proposal.candidate.node(proposal.path))
                incremental = sum(sampler.leaf_log_marginal(leaf, state.latents) for _, leaf in new) - sum(
                    sampler.leaf_log_marginal(leaf, state.latents) for _, leaf in old
                )
                full = sampler.log_marginal(proposal.candidate, state.latents) - sampler.log_marginal(
                    state.tree, state.latents
                )
                assert incremental == pytest.approx(full, abs=1e-8)
                compared += 1
            state, _, _ = sampler.step(state)
        assert compared > 0

    def test_identical_candidate_is_always_accepted(self, scenario1):
        sampler = TreeSampler(small_config(), scenario1)
        tree = Tree.root_only(scenario1)
        proposal = Proposal(MoveType.CHANGE1, tree, 0.0, ())
        assert sampler.acceptance_log_ratio(tree, proposal, None) == 0.0

    def test_impossible_reverse_move_is_rejected(self, scenario1):
        sampler = TreeSampler(small_config(), scenario1)
        tree = Tree.root_only(scenario1)
        proposal = Proposal(MoveType.GROW, tree, -math.inf, ())
        assert sampler.acceptance_log_ratio(tree, proposal, None) == -math.inf


class TestStep:
    def test_no_feasible_move_only_redraws_parameters(self):
        data = make_dataset(np.arange(15.0), [0, 1, 0, 2, 1, 0, 0, 1, 3, 0, 1, 0, 0, 1, 2])
        sampler = TreeSampler(small_config(restarts=1), data)
        state = sampler.initial_state(0)
        new_state, record = step(state, sampler)
        assert new_state.tree is state.tree
        assert not record.accepted
        assert record.n_leaves == 1
        assert record.iteration == 1
        assert set(new_state.params) == {()}

    def test_latents_of_the_previous_state_are_untouched(self, scenario1):
        sampler = TreeSampler(small_config(family="zip1"), scenario1)
        state = sampler.initial_state(0)
        before = state.latents.phi.copy()
        sampler.step(state)
        np.testing.assert_array_equal(state.latents.phi, before)

    def test_parameters_cover_exactly_the_leaves(self, scenario1):
        sampler = TreeSampler(small_config(family="nb2"), scenario1)
        state = sampler.initial_state(0)
        for _ in range(40):
            state, _, _ = sampler.step(state)
            assert set(state.params) == {path for path, _ in state.tree.leaves()}


class TestRun:
    def test_trace_layout_and_archive(self, scenario1):
        config = small_config(restarts=3)
        buffer = TraceBuffer(batch_size=25)
        batches = []
        buffer.subscribe(batches.append)
        result = run(config, scenario1, trace=buffer)
        assert len(result.trace) == 3 * config.iterations
        assert [(r.restart, r.iteration) for r in result.trace[:2]] == [(0, 1), (0, 2)]
        assert sum(len(batch) for batch in batches) == len(result.trace)
        for entry in result.archive:
            assert entry.iteration > config.burn_in
            assert all(leaf.params is not None for _, leaf in entry.tree.leaves())
        keys = [(e.restart, e.iteration) for e in result.archive]
        assert keys == sorted(keys)
        proposed = sum(result.acceptance.proposed.values())
        assert proposed == 3 * (config.iterations - config.burn_in)

    def test_archive_entry_round_trip(self, scenario1):
        result = run(small_config(family="zip1", restarts=1, iterations=120, burn_in=0), scenario1)
        assert result.archive
        entry = result.archive[-1]
        restored = ArchiveEntry.from_dict(entry.to_dict(), scenario1.schema)
        assert restored.tree.describe() == entry.tree.describe()
        assert restored.log_data_lik == entry.log_data_lik
        assert len(restored.summaries) == entry.n_leaves
        assert restored.summaries == entry.summaries


def log_gamma_density(x: float, shape: float, rate: float) -> float:
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def log_quad(log_f, upper: float, peak: float) -> float:
    """log of the integral of exp(log_f) over (0, upper), scaled at the peak for precision."""
    offset = log_f(peak)
    value, _ = integrate.quad(
        lambda x: math.exp(log_f(x) - offset) if x > 0.0 else 0.0,
        0.0,
        upper,
        points=[peak],
        epsabs=0.0,
        epsrel=1e-8,
        limit=200,
    )
    return offset + math.log(value)


def exact_leaf_log_marginal(model, stats, data) -> float:
    """
    Evidence of one leaf with its parameters integrated numerically.

    Negative-binomial leaves keep κ at the leaf's moment estimate; zero-inflated
    leaves integrate over both μ and λ.
    """
    if not model.augmented:
        return model.log_marginal(stats, data)
    claims, exposure = data.claims[stats.rows], data.exposure[stats.rows]
    prior = model.prior
    lam_hat = max(stats.sum_claims / stats.sum_exposure, 0.05)
    if model.kind in (FamilyKind.NB1, FamilyKind.NB2):
        kappa = model.kappa(stats, data)

        def log_lam(lam):
            pmf = model.log_pmf(NodeParams(lam, kappa=kappa), claims, exposure).sum()
            return float(pmf) + log_gamma_density(lam, prior.alpha, prior.beta)

        return log_quad(log_lam, 20.0, lam_hat)

    def log_joint(mu, lam):
        pmf = model.log_pmf(NodeParams(lam, mu=mu), claims, exposure).sum()
        density = log_gamma_density(mu, prior.alpha1, prior.beta1) + log_gamma_density(lam, prior.alpha, prior.beta)
        return float(pmf) + density

    grid = [(log_joint(mu, lam), mu, lam) for mu in np.linspace(0.05, 30.0, 60) for lam in np.linspace(0.05, 10.0, 60)]
    _, mu_hat, lam_hat = max(grid)
    return log_quad(lambda mu: log_quad(lambda lam: log_joint(mu, lam), 10.0, lam_hat), 30.0, mu_hat)


def exact_split_probability(sampler: TreeSampler, data) -> float:
    """Posterior probability of the split tree in a two-tree space."""
    root = Tree.root_only(data)
    rule = sampler.candidates.feasible(root.root.stats)[0][0]
    split = apply_structural_edit(root, Grow((), rule), data, sampler.candidates.min_node_size)

    def log_posterior(tree):
        evidence = sum(exact_leaf_log_marginal(sampler.model, leaf.stats, data) for _, leaf in tree.leaves())
        return evidence + sampler.log_prior(tree)

    return 1.0 / (1.0 + math.exp(log_posterior(root) - log_posterior(split)))


def two_tree_config(family: str, iterations: int, burn_in: int, seed: int) -> ChainConfig:
    return ChainConfig(
        iterations=iterations,
        burn_in=burn_in,
        restarts=1,
        proposal_mix=ProposalMix(grow=0.5, prune=0.5, change1=0.0, change2=0.0, swap=0.0),
        prior=TreePriorConfig(gamma=0.5, rho=0.0, min_node_size=10),
        family=family,
        hyper=GammaPriorPair(1.0, 1.0),
        seed=seed,
    )


class TestExactEvidence:
    def test_poisson_quadrature_matches_the_closed_form(self, binary_data):
        model = make_family("poisson", GammaPriorPair(1.0, 1.0))
        stats = Tree.root_only(binary_data).root.stats
        closed = model.log_marginal(stats, binary_data)
        prior = model.prior

        def log_lam(lam):
            pmf = model.log_pmf(NodeParams(lam), binary_data.claims, binary_data.exposure).sum()
            return float(pmf) + log_gamma_density(lam, prior.alpha, prior.beta)

        assert log_quad(log_lam, 20.0, 1.0) == pytest.approx(closed, abs=1e-6)


@pytest.mark.slow
class TestStationarity:
    @pytest.mark.parametrize(
        "family, dataset",
        [
            ("poisson", "binary_data"),
            ("nb1", "overdispersed_data"),
            ("nb2", "overdispersed_data"),
            ("zip1", "binary_data"),
            ("zip2", "binary_data"),
        ],
    )
    def test_visits_match_the_exact_posterior(self, request, family, dataset):
        data = request.getfixturevalue(dataset)
        config = two_tree_config(family, iterations=100_000, burn_in=1_000, seed=17)
        sampler = TreeSampler(config, data)
        expected = exact_split_probability(sampler, data)
        result = sampler.run()
        visits = [r.n_leaves == 2 for r in result.trace if r.iteration > config.burn_in]
        assert abs(float(np.mean(visits)) - expected) < 0.05

    def test_flows_between_the_two_trees_balance(self, binary_data):
        config = two_tree_config("poisson", iterations=20_000, burn_in=0, seed=23)
        leaves = [r.n_leaves for r in TreeSampler(config, binary_data).run().trace]
        up = sum(1 for a, b in zip(leaves, leaves[1:]) if (a, b) == (1, 2))
        down = sum(1 for a, b in zip(leaves, leaves[1:]) if (a, b) == (2, 1))
        assert abs(up - down) <= 1

    def test_scenario_signal_dominates_usage(self, scenario1):
        config = ChainConfig(iterations=1_500, burn_in=500, restarts=1, prior=TreePriorConfig(0.99, 15.0), seed=3)
        result = TreeSampler(config, scenario1).run()
        usage = result.variable_usage_totals()
        signal = usage[0] + usage[1]
        noise = usage[2:].sum()
        assert signal > 10 * noise
        assert result.trace[-1].n_leaves >= 3

    def test_change1_is_accepted_more_often_than_grow_and_prune(self):
        data = simulate_scenario(ScenarioConfig(scenario=1, n=5000, seed=1))
        config = ChainConfig(
            iterations=3_000,
            burn_in=500,
            restarts=2,
            proposal_mix=ProposalMix.uniform(),
            prior=TreePriorConfig(0.99, 15.0),
            seed=8,
        )
        acceptance = TreeSampler(config, data).run().acceptance
        change1 = acceptance.rate(MoveType.CHANGE1.value)
        assert change1 > acceptance.rate(MoveType.GROW.value)
        assert change1 > acceptance.rate(MoveType.PRUNE.value)
