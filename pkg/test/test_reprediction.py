import numpy as np
import pytest

from banditcpdp.bandit import EpsilonGreedy, UCB, make_arms
from banditcpdp.errors import InvariantError
from banditcpdp.evaluation import count_found_defects
from banditcpdp.reprediction import (BASELINE, RETEST, ApproachKind, MultipleRetests, check_flip_monotonicity,
									 count_retests, initial_reprediction_model, parse_approach, retest_frame,
									 run_approach, run_retest_pass)
from banditcpdp.simulator import NO_OVERLOOK, OverlookModel, make_order, run_baseline


def arms_with_aucs(aucs):
	arms = make_arms(len(aucs))
	for arm, auc in zip(arms, aucs):
		# TPR = 1, TNR = 2 * auc - 1 over 100 negatives
		arm.tp = 1
		arm.tn = int(round(100 * (2 * auc - 1)))
		arm.fp = 100 - arm.tn
	return arms


class TestApproachKind:

	def test_parse(self):
		assert parse_approach('baseline') == BASELINE
		assert parse_approach('retest') == RETEST
		assert parse_approach('multiple_retests') == MultipleRetests(2)
		assert parse_approach('multiple_retests:3').passes == 3
		assert MultipleRetests(2).name == 'multiple_retests'
		assert MultipleRetests(3).name == 'multiple_retests:3'

	@pytest.mark.parametrize('text', ['retests', 'multiple_retests:1', 'multiple_retests:x', 'retest:2'])
	def test_invalid(self, text):
		with pytest.raises(ValueError):
			parse_approach(text)

	def test_direct_construction_checked(self):
		with pytest.raises(ValueError):
			ApproachKind('retest', 2)


class TestInitialModel:

	def test_fig_aucs(self):
		arms = arms_with_aucs([0.75, 0.77, 0.74, 0.73])
		assert [a.auc for a in arms] == pytest.approx([0.75, 0.77, 0.74, 0.73])
		assert initial_reprediction_model(arms) == 1

	def test_single_arm(self):
		assert initial_reprediction_model(make_arms(1)) == 0

	def test_tie(self):
		assert initial_reprediction_model(arms_with_aucs([0.7, 0.7])) == 0

	def test_empty(self):
		with pytest.raises(ValueError):
			initial_reprediction_model([])


def baseline_of(target, models, policy=EpsilonGreedy(1.), overlook=NO_OVERLOOK, seed=0):
	order = make_order(target.n_modules, np.random.default_rng(seed))
	return run_baseline(models, target, order, policy, overlook, np.random.default_rng(seed + 1))

def baseline_missing_defects(target, models):
	"""First seeded baseline that leaves some defective module predicted clean."""
	for seed in range(100):
		baseline = baseline_of(target, models, seed=seed)
		if np.any(target.labels & ~baseline.prediction_vector()):
			return baseline
	raise AssertionError("no baseline misses a defect")


class TestRetestPass:

	def test_missed_defects_are_found(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_missing_defects(target, models)
		missed = [m for m, label in zip(target.ids, target.labels) if label and not baseline.final_prediction[m]]

		run, entries = run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0))
		assert count_found_defects(run.prediction_vector(), target.labels) == target.labels.sum()
		retested = [e for e in entries if e.retested]
		assert sorted(e.module_id for e in retested) == sorted(missed)
		assert all(e.retest_recorded_result is True for e in retested)
		assert all(e.reprediction_arm == 0 for e in entries)
		assert all(e.retest_recorded_result is None for e in entries if not e.retested)

	def test_candidates_are_non_defective_predictions(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models, seed=4)
		_, entries = run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0))
		assert {e.module_id for e in entries} == {m for m, p in baseline.final_prediction.items() if not p}
		positions = {m: i for i, m in enumerate(baseline.module_ids[k] for k in baseline.order)}
		visits = [positions[e.module_id] for e in entries]
		assert visits == sorted(visits)

	def test_all_defective_is_noop(self, make_scripted):
		target, models = make_scripted([1, 0, 1, 0], [[True] * 4, [True] * 4])
		baseline = baseline_of(target, models)
		run, entries = run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0))
		assert entries == []
		assert run.final_prediction == baseline.final_prediction

	def test_no_defective_repredictions_is_noop(self, make_scripted):
		target, models = make_scripted([1, 0, 1, 0], [[False] * 4, [False] * 4])
		baseline = baseline_of(target, models)
		run, entries = run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0))
		assert len(entries) == 4
		assert count_retests(entries) == 0
		assert run.final_prediction == baseline.final_prediction
		assert run.arms == baseline.arms

	def test_model_changes_mid_pass(self, make_scripted):
		# t0 is clean but arm 0 calls it defective; t1 is defective and only arm 1 says so
		target, models = make_scripted([0, 1], [[True, False], [False, True]])
		run = run_baseline(models, target, [0, 1], UCB(), NO_OVERLOOK, np.random.default_rng(0))
		run.final_prediction = {m: False for m in run.module_ids}
		a, b = run.arms
		a.tp, a.fn, a.tn, a.fp = 10, 0, 10, 1
		b.tp, b.fn, b.tn, b.fp = 9, 1, 10, 0
		assert a.auc > b.auc

		run, entries = run_retest_pass(run, models, NO_OVERLOOK, 1, np.random.default_rng(0))
		assert [e.reprediction_arm for e in entries] == [0, 1]
		assert [e.retested for e in entries] == [True, True]
		assert entries[0].retest_recorded_result is False
		assert entries[0].arm_aucs_after[1] > entries[0].arm_aucs_after[0]
		# a retested module stays defective whatever the retest recorded
		assert run.final_prediction == {'t0': True, 't1': True}

	def test_policy_reselection(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models)
		run, entries = run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0),
									   reselection='policy', policy=EpsilonGreedy(0.))
		assert count_found_defects(run.prediction_vector(), target.labels) == target.labels.sum()
		with pytest.raises(ValueError):
			run_retest_pass(baseline.clone(), models, NO_OVERLOOK, 1, np.random.default_rng(0), reselection='policy')


class TestRunApproach:

	def test_baseline_unchanged(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models)
		run, log = run_approach(baseline, models, BASELINE, NO_OVERLOOK, np.random.default_rng(0))
		assert run is baseline
		assert log == []

	def test_shared_baseline_not_modified(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models)
		before = dict(baseline.final_prediction)
		run_approach(baseline, models, MultipleRetests(2), OverlookModel(0.2), np.random.default_rng(0))
		assert baseline.final_prediction == before

	def test_fixpoint(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_missing_defects(target, models)
		_, log = run_approach(baseline, models, MultipleRetests(2), NO_OVERLOOK, np.random.default_rng(0))
		assert count_retests([e for e in log if e.pass_index == 1]) > 0
		assert count_retests([e for e in log if e.pass_index == 2]) == 0

	def test_retest_is_first_pass(self, small_registry):
		from banditcpdp.learner import build_arm_models
		models = build_arm_models([small_registry.projects[n] for n in small_registry.learning_names])
		baseline = baseline_of(small_registry.target, models, policy=EpsilonGreedy(0.1), overlook=OverlookModel(0.2))
		single, single_log = run_approach(baseline, models, RETEST, OverlookModel(0.2), np.random.default_rng(5))
		_, multi_log = run_approach(baseline, models, MultipleRetests(2), OverlookModel(0.2),
									np.random.default_rng(5))
		assert single_log == [e for e in multi_log if e.pass_index == 1]

	def test_found_defects_monotone(self, small_registry):
		from banditcpdp.learner import build_arm_models
		models = build_arm_models([small_registry.projects[n] for n in small_registry.learning_names])
		labels = small_registry.target.labels
		for seed in range(10):
			baseline = baseline_of(small_registry.target, models, policy=UCB(), overlook=OverlookModel(0.2),
								   seed=seed)
			found = [count_found_defects(baseline.prediction_vector(), labels)]
			for approach in (RETEST, MultipleRetests(2), MultipleRetests(3)):
				run, _ = run_approach(baseline, models, approach, OverlookModel(0.2), np.random.default_rng(seed))
				found.append(count_found_defects(run.prediction_vector(), labels))
			assert found == sorted(found)

	def test_flip_check(self):
		with pytest.raises(InvariantError):
			check_flip_monotonicity(np.array([True, False]), np.array([False, False]))
		check_flip_monotonicity(np.array([False, False]), np.array([True, False]))


class TestRetestTrace:

	def test_empty_log_keeps_header(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models)
		frame = retest_frame(baseline, [])
		assert len(frame) == 0
		assert 'reprediction_model' in frame.columns

	def test_rows(self, oracle_pair):
		target, models = oracle_pair
		baseline = baseline_of(target, models)
		run, log = run_approach(baseline, models, RETEST, NO_OVERLOOK, np.random.default_rng(0))
		frame = retest_frame(run, log)
		assert len(frame) == len(log)
		assert set(frame.loc[frame['reprediction'] == 'DE', 'retest_result']) <= {'DE', 'ND'}
		assert set(frame.loc[frame['reprediction'] == 'ND', 'retest_result']) <= {''}
