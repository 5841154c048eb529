## Copyright 2024 The banditcpdp developers.

## This program is free software; you can redistribute it and/or
## modify it under the terms of the GNU General Public License as
## published by the Free Software Foundation; either version 3 of the
## License, or (at your option) any later version.

## This program is distributed in the hope that it will be useful,
## but WITHOUT ANY WARRANTY; without even the implied warranty of
## MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
## GNU General Public License for more details.

## You should have received a copy of the GNU General Public License
## along with this program.  If not, see <http://www.gnu.org/licenses/>.


"""
BANDITCPDP

Bandit-based Cross-Project Defect Prediction and Retest Simulation Tools

Property suites run by `banditcpdp selftest`. Every check returns a list
of failure messages; an empty list means the property held.
"""

import itertools
import logging
import math
import numpy as np

from .bandit import EpsilonGreedy, UCB, arm_auc, make_arms, select_arm
from .dataset import generate_synthetic_project, ProjectRegistry
from .evaluation import (_signed_rank_exact_p, _signed_rank_normal_p, _signed_rank_stats, count_found_defects,
						 final_auc, NORMAL_APPROX_GAP, wilcoxon_signed_rank)
from .learner import fit_logistic, logistic_loss_and_grad, train_models
from .reprediction import MultipleRetests, RETEST, run_approach
from .simulator import NO_OVERLOOK, OverlookModel, make_order, run_baseline
from .utils import make_optional_progressbar

logger = logging.getLogger(__name__)

SEED = 20230401


def pairwise_auc(scores, labels):
	"""Brute-force AUC over all (positive, negative) pairs, ties counting one half."""
	pos = [s for s, l in zip(scores, labels) if l]
	neg = [s for s, l in zip(scores, labels) if not l]
	if not pos or not neg:
		return 0.5
	total = sum(1. if p > n else 0.5 if p == n else 0. for p, n in itertools.product(pos, neg))
	return total / (len(pos) * len(neg))

def check_auc_oracle(n_instances=500, rng=None):
	rng = rng or np.random.default_rng(SEED)
	failures = []
	if abs(arm_auc(8, 4, 6, 2) - 0.7) > 1e-12:
		failures.append("arm_auc(8, 4, 6, 2) != 0.7")
	for i in range(n_instances):
		n = int(rng.integers(1, 40))
		labels = rng.random(n) < rng.random()
		predictions = rng.random(n) < rng.random()
		expected = pairwise_auc(predictions.astype(float), labels)
		tp = int(np.sum(predictions & labels))
		fp = int(np.sum(predictions & ~labels))
		tn = int(np.sum(~predictions & ~labels))
		fn = int(np.sum(~predictions & labels))
		for name, value in (('arm_auc', arm_auc(tp, fp, tn, fn)), ('final_auc', final_auc(predictions, labels))):
			if abs(value - expected) > 1e-12:
				failures.append(f"instance {i}: {name} {value} != pairwise {expected}")
	return failures

def check_policies(n_states=10000, n_draws=100000, rng=None):
	rng = rng or np.random.default_rng(SEED)
	failures = []
	greedy = EpsilonGreedy(0.)
	for i in range(n_states):
		arms = make_arms(int(rng.integers(2, 8)))
		for arm in arms:
			arm.tp, arm.fp, arm.tn, arm.fn = (int(v) for v in rng.integers(0, 4, size=4))
		aucs = np.array([a.auc for a in arms])
		index = select_arm(greedy, arms, t=2, rng=rng)
		if aucs[index] != aucs.max():
			failures.append(f"state {i}: epsilon=0 chose auc {aucs[index]} below maximum {aucs.max()}")

	n_arms = 4
	arms = make_arms(n_arms)
	arms[0].tp, arms[0].tn = 5, 5
	counts = np.zeros(n_arms)
	explore = EpsilonGreedy(1.)
	for _ in range(n_draws):
		counts[select_arm(explore, arms, t=2, rng=rng)] += 1
	p = 1. / n_arms
	sigma = math.sqrt(n_draws * p * (1 - p))
	if np.any(np.abs(counts - n_draws * p) > 3 * sigma):
		failures.append(f"epsilon=1 selection counts {counts.tolist()} not uniform")

	for n_arms in range(2, 9):
		arms = make_arms(n_arms)
		order = [select_arm(UCB(), arms, t, rng) for t in range(1, n_arms + 1)]
		if sorted(order) != list(range(n_arms)):
			failures.append(f"UCB with {n_arms} arms retried an arm before trying all: {order}")
	return failures

def check_wilcoxon(n_instances=200, rng=None):
	rng = rng or np.random.default_rng(SEED)
	failures = []
	p = wilcoxon_signed_rank([(0., d) for d in (1., 2., 3., 4., 5., 6.)])
	if abs(p - 0.03125) > 1e-12:
		failures.append(f"n=6 all positive: p {p} != 0.03125")
	if wilcoxon_signed_rank([(1., 1.)] * 5) != 1.:
		failures.append("all-equal pairs do not give p = 1")
	for i in range(n_instances):
		pairs = rng.normal(size=(12, 2)) + [0., rng.normal(0., 0.5)]
		positive, ranks = _signed_rank_stats(pairs)
		exact = _signed_rank_exact_p(positive, ranks)
		approx = _signed_rank_normal_p(positive, ranks)
		if abs(exact - approx) > NORMAL_APPROX_GAP:
			failures.append(f"instance {i}: exact {exact:.4f} vs normal {approx:.4f}")
	return failures

def check_logistic_gradient(n_instances=100, rng=None):
	rng = rng or np.random.default_rng(SEED)
	failures = []
	h = 1e-6
	for i in range(n_instances):
		n, d = int(rng.integers(5, 40)), int(rng.integers(1, 6))
		x = rng.normal(size=(n, d))
		y = rng.random(n) < 0.5
		params = rng.normal(size=d + 1)
		_, grad = logistic_loss_and_grad(params, x, y)
		numeric = np.empty_like(grad)
		for j in range(d + 1):
			step = np.zeros_like(params)
			step[j] = h
			numeric[j] = (logistic_loss_and_grad(params + step, x, y)[0]
						  - logistic_loss_and_grad(params - step, x, y)[0]) / (2 * h)
		error = np.linalg.norm(grad - numeric) / max(np.linalg.norm(grad), np.linalg.norm(numeric), 1e-12)
		if error >= 1e-5:
			failures.append(f"instance {i}: relative gradient error {error:.2e}")

	x = np.array([[-2.], [-1.5], [-1.], [-0.5], [0.5], [1.], [1.5], [2.]])
	y = x[:, 0] > 0
	fit = fit_logistic(x, y)
	accuracy = np.mean((x @ fit.weights + fit.bias > 0) == y)
	if accuracy != 1.:
		failures.append(f"separable toy: training accuracy {accuracy}")
	return failures

def _selftest_registry(rng):
	projects = [generate_synthetic_project('target', 80, 0.2, 5, 0.8, rng)]
	for i in range(8):
		projects.append(generate_synthetic_project('p{}'.format(i), int(rng.integers(40, 120)),
												   float(rng.uniform(0.1, 0.4)), 5, float(rng.uniform(0.2, 1.2)), rng))
	return ProjectRegistry(projects, 'target')

def check_flip_monotonicity(n_repetitions=1000, rng=None, show_progress=False):
	rng = rng or np.random.default_rng(SEED)
	registry = _selftest_registry(rng)
	models, _ = train_models([registry.projects[n] for n in registry.learning_names])
	names = sorted(models)
	target = registry.target
	policies = [EpsilonGreedy(0.), EpsilonGreedy(0.1), EpsilonGreedy(0.3), UCB()]
	failures = []
	maybe_progressbar = make_optional_progressbar(show_progress, 'Flip monotonicity', n_repetitions)
	for i in maybe_progressbar(range(n_repetitions)):
		k = int(rng.integers(2, len(names) + 1))
		arms = [models[names[j]] for j in sorted(rng.choice(len(names), size=k, replace=False))]
		policy = policies[i % len(policies)]
		overlook = OverlookModel(0.2) if rng.random() < 0.5 else NO_OVERLOOK
		baseline = run_baseline(arms, target, make_order(target.n_modules, rng), policy, overlook, rng)
		found = [count_found_defects(baseline.prediction_vector(), target.labels)]
		for approach in (RETEST, MultipleRetests(2)):
			run, _ = run_approach(baseline, arms, approach, overlook, np.random.default_rng(i))
			found.append(count_found_defects(run.prediction_vector(), target.labels))
		if not found[0] <= found[1] <= found[2]:
			failures.append(f"repetition {i}: found defects {found}")
	return failures

SUITES = {
	'auc_oracle': (check_auc_oracle, {'n_instances': 500}, {'n_instances': 100}),
	'policies': (check_policies, {'n_states': 10000, 'n_draws': 100000}, {'n_states': 1000, 'n_draws': 10000}),
	'wilcoxon': (check_wilcoxon, {'n_instances': 200}, {'n_instances': 50}),
	'logistic_gradient': (check_logistic_gradient, {'n_instances': 100}, {'n_instances': 20}),
	'flip_monotonicity': (check_flip_monotonicity, {'n_repetitions': 1000}, {'n_repetitions': 50}),
}

def run_selftest(quick=False, suites=None):
	"""Run the property suites; returns failure messages by suite name."""
	report = {}
	for name in suites or SUITES:
		func, full, reduced = SUITES[name]
		failures = func(**(reduced if quick else full))
		report[name] = failures
		if failures:
			logger.error("%s: %d failures, first: %s", name, len(failures), failures[0])
		else:
			logger.info("%s: passed", name)
	return report
