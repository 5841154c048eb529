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

Retesting of modules predicted non-defective, driven by a re-prediction
model chosen from the arms' accuracy at the end of a testing pass.
"""

import logging
from dataclasses import dataclass
from typing import Optional
import numpy as np
import pandas as pd

from .bandit import greedy_index, select_arm, update_arms
from .errors import InvariantError
from .simulator import arm_labels, flag, record_test

logger = logging.getLogger(__name__)

RESELECTION_MODES = ('greedy', 'policy')


@dataclass
class RetestLogEntry:
	pass_index: int
	module_id: str
	reprediction_arm: int
	reprediction: bool
	retested: bool
	retest_recorded_result: Optional[bool]
	arm_aucs_after: list
	per_arm_prediction: list


@dataclass(frozen=True)
class ApproachKind:
	kind: str
	passes: int = 0

	def __post_init__(self):
		expected = {'baseline': 0, 'retest': 1}
		if self.kind in expected:
			if self.passes != expected[self.kind]:
				raise ValueError(f"{self.kind} runs {expected[self.kind]} retest passes, got {self.passes}.")
		elif self.kind == 'multiple_retests':
			if self.passes < 2:
				raise ValueError(f"multiple_retests needs at least 2 passes, got {self.passes}.")
		else:
			raise ValueError(f"Unknown approach `{self.kind}`.")

	@property
	def name(self):
		if self.kind == 'multiple_retests' and self.passes != 2:
			return 'multiple_retests:{}'.format(self.passes)
		return self.kind

	@property
	def short(self):
		return {'baseline': 'B', 'retest': 'R', 'multiple_retests': 'MR'}[self.kind]


BASELINE = ApproachKind('baseline', 0)
RETEST = ApproachKind('retest', 1)

def MultipleRetests(passes=2):
	return ApproachKind('multiple_retests', passes)

def parse_approach(text):
	"""`baseline`, `retest`, `multiple_retests` or `multiple_retests:<passes>` -> ApproachKind."""
	if isinstance(text, ApproachKind):
		return text
	kind, _, arg = str(text).strip().lower().partition(':')
	if kind == 'baseline' and not arg:
		return BASELINE
	if kind == 'retest' and not arg:
		return RETEST
	if kind == 'multiple_retests':
		try:
			return MultipleRetests(int(arg) if arg else 2)
		except ValueError as e:
			raise ValueError(f"Invalid approach `{text}`: {e}") from None
	raise ValueError(f"Unknown approach `{text}`; use baseline, retest or multiple_retests[:<passes>].")


def initial_reprediction_model(arms):
	"""The most accurate arm after testing; ties go to the lowest index."""
	return greedy_index(arms)

def run_retest_pass(run, models, overlook, pass_index, rng, reselection='greedy', policy=None):
	"""
	One retest pass over `run`, modified in place.

	Modules are visited in the original test order. For each module still
	predicted non-defective, the current re-prediction model predicts it
	again; a defective re-prediction flips the module to defective and
	retests it, and all arms are scored against the retest result before
	the re-prediction model is chosen again.

	Returns
	-------
	(run, entries) : the updated run and its RetestLogEntry list
	"""
	if reselection not in RESELECTION_MODES:
		raise ValueError(f"Unknown re-prediction selection `{reselection}`; use one of {RESELECTION_MODES}.")
	if reselection == 'policy' and policy is None:
		raise ValueError("Re-prediction selection `policy` needs the run's policy.")
	if models is not None and len(models) != len(run.arms):
		raise ValueError(f"{len(models)} models for a run with {len(run.arms)} arms.")

	current = initial_reprediction_model(run.arms)
	t = sum(a.n_selected for a in run.arms)
	entries = []
	n_retests = 0
	for m in run.order:
		module_id = run.module_ids[m]
		if run.final_prediction[module_id]:
			continue
		per_arm = run.predictions[:, m]
		reprediction = bool(per_arm[current])
		recorded = None
		if reprediction:
			run.final_prediction[module_id] = True
			recorded = record_test(bool(run.true_labels[m]), overlook, rng)
			update_arms(run.arms, per_arm, recorded, run.probabilities[:, m])
			n_retests += 1
		entries.append(RetestLogEntry(pass_index=pass_index,
									  module_id=module_id,
									  reprediction_arm=current,
									  reprediction=reprediction,
									  retested=reprediction,
									  retest_recorded_result=recorded,
									  arm_aucs_after=[a.auc for a in run.arms],
									  per_arm_prediction=[bool(p) for p in per_arm]))
		if reprediction:
			if reselection == 'greedy':
				new = greedy_index(run.arms)
			else:
				t += 1
				new = select_arm(policy, run.arms, t, rng)
			if new != current:
				logger.debug("Pass %d: re-prediction model %d -> %d after retesting %s",
							 pass_index, current, new, module_id)
			current = new

	logger.debug("Pass %d: %d candidates, %d retests", pass_index, len(entries), n_retests)
	return run, entries

def check_flip_monotonicity(before, after):
	"""Predictions may only move from non-defective to defective."""
	lost = np.flatnonzero(before & ~after)
	if len(lost):
		raise InvariantError(f"{len(lost)} defective predictions were reverted, first at module index {lost[0]}.")

def run_approach(baseline, models, approach, overlook, rng, reselection='greedy', policy=None):
	"""
	Final run of `approach` derived from a completed baseline run.

	The baseline itself is never modified: retest passes extend a clone,
	so every approach of a repetition shares the baseline trace.

	Returns
	-------
	(run, retest_log) : final SimulationRun and the entries of all passes
	"""
	approach = parse_approach(approach)
	if approach.passes == 0:
		return baseline, []

	run = baseline.clone()
	log = []
	before = run.prediction_vector()
	for pass_index in range(1, approach.passes + 1):
		run, entries = run_retest_pass(run, models, overlook, pass_index, rng,
									   reselection=reselection, policy=policy)
		after = run.prediction_vector()
		check_flip_monotonicity(before, after)
		before = after
		log.extend(entries)
	return run, log

def count_retests(retest_log):
	return sum(1 for e in retest_log if e.retested)


def retest_frame(run, retest_log):
	"""One row per re-predicted candidate, mirroring the columns of a retest table."""
	labels = arm_labels(run.arm_names)
	rows = []
	for entry in retest_log:
		row = {'pass': entry.pass_index, 'module': entry.module_id}
		row.update({'pred_' + l: flag(p) for l, p in zip(labels, entry.per_arm_prediction)})
		row.update({
			'reprediction_model': labels[entry.reprediction_arm],
			'reprediction': flag(entry.reprediction),
			'retest_result': flag(entry.retest_recorded_result) if entry.retested else '',
		})
		row.update({'auc_' + l: a for l, a in zip(labels, entry.arm_aucs_after)})
		rows.append(row)
	columns = (['pass', 'module'] + ['pred_' + l for l in labels]
			   + ['reprediction_model', 'reprediction', 'retest_result']
			   + ['auc_' + l for l in labels])
	return pd.DataFrame(rows, columns=columns)
