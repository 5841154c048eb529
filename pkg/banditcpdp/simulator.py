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

import copy
import logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd

from .bandit import make_arms, select_arm, update_arms
from .learner import predict_probs
from .utils import make_optional_progressbar

logger = logging.getLogger(__name__)

HIGH_EFFORT = 'High'
LOW_EFFORT = 'Low'

# Outcome cases of one test event
CASE_ALPHA = 'alpha'	# predicted defective, module clean: wasted thorough test
CASE_BETA = 'beta'		# predicted non-defective, module defective: lightly tested
CASE_GAMMA = 'gamma'	# predicted and truly defective, test overlooked the defect
CASE_NONE = 'none'


@dataclass(frozen=True)
class OverlookModel:
	"""Probability that testing a truly defective module records it as clean."""
	p_overlook: float = 0.2

	def __post_init__(self):
		if not 0. <= self.p_overlook <= 1.:
			raise ValueError(f"p_overlook must lie in [0, 1], got {self.p_overlook}.")


NO_OVERLOOK = OverlookModel(0.)


@dataclass
class TestLogEntry:
	module_id: str
	order: int
	per_arm_prediction: list
	selected_arm: int
	used_prediction: bool
	recorded_result: bool
	true_label: bool
	effort: str
	outcome_case: str
	per_arm_auc_after: list


@dataclass
class SimulationRun:
	"""
	Trace of one testing pass over the target project.

	`predictions`/`probabilities` are (arms x modules) caches in dataset
	module order; `order` lists module indices in test order.
	"""
	target_name: str
	module_ids: list
	true_labels: np.ndarray
	arm_names: list
	predictions: np.ndarray
	probabilities: np.ndarray
	order: list
	log: list
	final_prediction: dict
	arms: list
	policy: str
	seeds: dict = field(default_factory=dict)

	@property
	def n_modules(self):
		return len(self.module_ids)

	def prediction_vector(self):
		return np.array([self.final_prediction[m] for m in self.module_ids], dtype=bool)

	def clone(self):
		return copy.deepcopy(self)

	def __repr__(self):
		return '<SimulationRun {} modules={} arms={} policy={}>'.format(
			self.target_name, self.n_modules, len(self.arm_names), self.policy)


def record_test(true_label, overlook, rng):
	"""Recorded result of testing one module: defects are overlooked with p_overlook."""
	if not true_label:
		return False
	return not bool(rng.random() < overlook.p_overlook)

def classify_outcome(used_prediction, true_label, recorded_result):
	if used_prediction and not true_label:
		return CASE_ALPHA
	if not used_prediction and true_label:
		return CASE_BETA
	if used_prediction and true_label and not recorded_result:
		return CASE_GAMMA
	return CASE_NONE

def make_order(n, rng):
	"""Uniformly random test order of `n` modules."""
	if n < 1:
		raise ValueError(f"Cannot order {n} modules.")
	return [int(i) for i in rng.permutation(n)]

def prediction_cache(models, target):
	"""(arms x modules) probabilities and labels of every model on every target module."""
	probabilities = np.vstack([predict_probs(m, target) for m in models])
	thresholds = np.array([m.threshold for m in models])[:, None]
	return probabilities >= thresholds, probabilities

def run_baseline(models, target, order, policy, overlook, rng, noise_rng=None, reward='binary',
				 seeds=None, show_progress=False):
	"""
	Bandit-based testing pass.

	For every module in `order`: select an arm with `policy`, use its
	prediction, test the module (recording a clean result for an
	overlooked defect), then score all arms against the recorded result.
	`rng` drives arm selection and `noise_rng` (default: `rng`) the
	overlooking.
	"""
	if len(models) < 2:
		raise ValueError(f"Bandit testing needs at least 2 models, got {len(models)}.")
	n = target.n_modules
	if sorted(order) != list(range(n)):
		raise ValueError(f"Test order is not a permutation of the {n} target modules.")
	if noise_rng is None:
		noise_rng = rng

	predictions, probabilities = prediction_cache(models, target)
	labels = target.labels
	arms = make_arms(len(models), reward=reward)
	used = np.zeros(n, dtype=bool)
	log = []

	maybe_progressbar = make_optional_progressbar(show_progress, 'Test ' + target.name, n)
	for t, m in enumerate(maybe_progressbar(order), start=1):
		per_arm = predictions[:, m]
		selected = select_arm(policy, arms, t, rng)
		used_prediction = bool(per_arm[selected])
		recorded = record_test(bool(labels[m]), overlook, noise_rng)
		update_arms(arms, per_arm, recorded, probabilities[:, m])
		used[m] = used_prediction

		log.append(TestLogEntry(module_id=target.ids[m],
								order=t,
								per_arm_prediction=[bool(p) for p in per_arm],
								selected_arm=selected,
								used_prediction=used_prediction,
								recorded_result=recorded,
								true_label=bool(labels[m]),
								effort=HIGH_EFFORT if used_prediction else LOW_EFFORT,
								outcome_case=classify_outcome(used_prediction, bool(labels[m]), recorded),
								per_arm_auc_after=[a.auc for a in arms]))
		logger.debug("t=%d module=%s arm=%d prediction=%s recorded=%s",
					 t, target.ids[m], selected, used_prediction, recorded)

	return SimulationRun(target_name=target.name,
						 module_ids=list(target.ids),
						 true_labels=labels.copy(),
						 arm_names=[m.source_project for m in models],
						 predictions=predictions,
						 probabilities=probabilities,
						 order=list(order),
						 log=log,
						 final_prediction={target.ids[i]: bool(used[i]) for i in range(n)},
						 arms=arms,
						 policy=getattr(policy, 'name', str(policy)),
						 seeds=dict(seeds or {}))


## Trace export

def flag(value):
	return 'DE' if value else 'ND'

def arm_labels(names):
	"""Column-safe, unique labels for arm names."""
	labels = []
	for i, name in enumerate(names):
		label = str(name)
		if label in labels or names.count(name) > 1:
			label = "{}_{}".format(label, i)
		labels.append(label)
	return labels

def trace_frame(run):
	"""One row per test event, mirroring the columns of a BA testing table."""
	labels = arm_labels(run.arm_names)
	rows = []
	for entry in run.log:
		row = {'module': entry.module_id, 'order': entry.order}
		row.update({'pred_' + l: flag(p) for l, p in zip(labels, entry.per_arm_prediction)})
		row.update({
			'selected_model': labels[entry.selected_arm],
			'prediction': flag(entry.used_prediction),
			'test_result': flag(entry.recorded_result),
			'true_label': flag(entry.true_label),
			'effort': entry.effort,
			'case': entry.outcome_case,
		})
		row.update({'auc_' + l: a for l, a in zip(labels, entry.per_arm_auc_after)})
		rows.append(row)
	columns = (['module', 'order'] + ['pred_' + l for l in labels]
			   + ['selected_model', 'prediction', 'test_result', 'true_label', 'effort', 'case']
			   + ['auc_' + l for l in labels])
	return pd.DataFrame(rows, columns=columns)

def case_counts(run):
	"""Counts of outcome cases and high-effort tests in a baseline trace."""
	counts = {CASE_ALPHA: 0, CASE_BETA: 0, CASE_GAMMA: 0}
	high = 0
	for entry in run.log:
		if entry.outcome_case in counts:
			counts[entry.outcome_case] += 1
		high += entry.effort == HIGH_EFFORT
	counts['high_effort'] = high
	return counts
