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
"""

import logging
import math
from dataclasses import dataclass, field
import numpy as np
from scipy.stats import rankdata

logger = logging.getLogger(__name__)

REWARD_MODES = ('binary', 'probability')


## Arm accuracy

def arm_auc(tp, fp, tn, fn):
	"""
	AUC of binary predictions, (TPR + TNR) / 2.

	With scores in {0, 1} the pairwise AUC (ties counting one half) reduces
	to balanced accuracy. Undefined when a class is absent: 0.5.
	"""
	if min(tp, fp, tn, fn) < 0:
		raise ValueError(f"Negative confusion count in {(tp, fp, tn, fn)}.")
	if tp + fn == 0 or tn + fp == 0:
		return 0.5
	return 0.5 * (tp / (tp + fn) + tn / (tn + fp))

def score_auc(scores, outcomes):
	"""Mann-Whitney AUC of real-valued scores against boolean outcomes; 0.5 if a class is absent."""
	scores = np.asarray(scores, dtype=float)
	outcomes = np.asarray(outcomes, dtype=bool)
	n_pos = int(outcomes.sum())
	n_neg = outcomes.size - n_pos
	if n_pos == 0 or n_neg == 0:
		return 0.5
	ranks = rankdata(scores)
	return float((ranks[outcomes].sum() - n_pos * (n_pos + 1) / 2.) / (n_pos * n_neg))


@dataclass
class ArmState:
	"""
	Running evaluation of one model against the recorded test results.

	Every arm is evaluated on every tested module, whether or not it was
	the selected one; `n_selected` counts only the steps it was used.
	"""
	model_index: int
	n_selected: int = 0
	tp: int = 0
	fp: int = 0
	tn: int = 0
	fn: int = 0
	reward: str = 'binary'
	scores: list = field(default_factory=list, repr=False)
	outcomes: list = field(default_factory=list, repr=False)

	@property
	def n_evaluated(self):
		return self.tp + self.fp + self.tn + self.fn

	@property
	def auc(self):
		if self.reward == 'probability':
			return score_auc(self.scores, self.outcomes)
		return arm_auc(self.tp, self.fp, self.tn, self.fn)

	def record(self, prediction, result, score=None):
		if prediction and result:
			self.tp += 1
		elif prediction:
			self.fp += 1
		elif result:
			self.fn += 1
		else:
			self.tn += 1
		if self.reward == 'probability':
			if score is None:
				raise ValueError("Probability reward needs the arm's score.")
			self.scores.append(float(score))
			self.outcomes.append(bool(result))

def make_arms(n_arms, reward='binary'):
	if reward not in REWARD_MODES:
		raise ValueError(f"Unknown reward mode `{reward}`; use one of {REWARD_MODES}.")
	return [ArmState(model_index=i, reward=reward) for i in range(n_arms)]

def update_arms(arms, per_arm_predictions, recorded_result, per_arm_scores=None):
	"""Score every arm's prediction for one module against the recorded result."""
	if len(per_arm_predictions) != len(arms):
		raise ValueError(f"{len(per_arm_predictions)} predictions for {len(arms)} arms.")
	if per_arm_scores is None:
		per_arm_scores = [None] * len(arms)
	for arm, prediction, score in zip(arms, per_arm_predictions, per_arm_scores):
		arm.record(bool(prediction), bool(recorded_result), score)
	return arms


## Policies

@dataclass(frozen=True)
class EpsilonGreedy:
	epsilon: float

	def __post_init__(self):
		if not 0. <= self.epsilon <= 1.:
			raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}.")

	@property
	def name(self):
		return 'epsilon:{:g}'.format(self.epsilon)


@dataclass(frozen=True)
class UCB:
	c: float = math.sqrt(2.)

	def __post_init__(self):
		if not self.c > 0.:
			raise ValueError(f"UCB exploration constant must be positive, got {self.c}.")

	@property
	def name(self):
		return 'ucb' if self.c == math.sqrt(2.) else 'ucb:{:g}'.format(self.c)


def parse_policy(text):
	"""`epsilon:<value>`, `ucb` or `ucb:<c>` -> policy."""
	if isinstance(text, (EpsilonGreedy, UCB)):
		return text
	kind, _, arg = str(text).strip().lower().partition(':')
	try:
		if kind in ('epsilon', 'eps', 'epsilon-greedy'):
			if not arg:
				raise ValueError("epsilon policy needs a value, e.g. `epsilon:0.1`")
			return EpsilonGreedy(float(arg))
		if kind == 'ucb':
			return UCB(float(arg)) if arg else UCB()
	except ValueError as e:
		raise ValueError(f"Invalid policy `{text}`: {e}") from None
	raise ValueError(f"Unknown policy `{text}`; use `epsilon:<value>` or `ucb`.")

def ucb_score(arm, t, c=math.sqrt(2.)):
	"""arm.auc + c * sqrt(ln t / n_selected); untried arms score +inf."""
	if t < 1:
		raise ValueError(f"t must be >= 1, got {t}.")
	if arm.n_selected == 0:
		return math.inf
	return arm.auc + c * math.sqrt(math.log(t) / max(arm.n_selected, 1))

def _argmax_random(values, rng):
	values = np.asarray(values, dtype=float)
	tied = np.flatnonzero(values == values.max())
	if len(tied) == 1:
		return int(tied[0])
	return int(rng.choice(tied))

def select_arm(policy, arms, t, rng):
	"""
	Choose the arm whose prediction is used for the t-th tested module.

	The first module uses a uniformly random arm. Later, epsilon-greedy
	explores with probability epsilon and otherwise takes the best AUC;
	UCB plays untried arms first (lowest index), then the best UCB score.
	Argmax ties are broken uniformly at random. Increments `n_selected`.
	"""
	n_arms = len(arms)
	if n_arms < 2:
		raise ValueError(f"Bandit selection needs at least 2 arms, got {n_arms}.")

	if t == 1:
		index = int(rng.integers(n_arms))
	elif isinstance(policy, EpsilonGreedy):
		if rng.random() < policy.epsilon:
			index = int(rng.integers(n_arms))
		else:
			index = _argmax_random([a.auc for a in arms], rng)
	elif isinstance(policy, UCB):
		untried = [i for i, a in enumerate(arms) if a.n_selected == 0]
		if untried:
			index = untried[0]
		else:
			index = _argmax_random([ucb_score(a, t, policy.c) for a in arms], rng)
	else:
		raise TypeError(f"Unknown policy {policy!r}.")

	arms[index].n_selected += 1
	return index

def greedy_index(arms):
	"""Index of the best AUC; ties go to the lowest index."""
	if not arms:
		raise ValueError("No arms to choose from.")
	return int(np.argmax([a.auc for a in arms]))
