import numpy as np
import pytest

from banditcpdp.bandit import EpsilonGreedy, UCB
from banditcpdp.simulator import (CASE_ALPHA, CASE_BETA, CASE_GAMMA, CASE_NONE, NO_OVERLOOK, OverlookModel,
								  arm_labels, case_counts, classify_outcome, make_order, prediction_cache,
								  record_test, run_baseline, trace_frame)


class TestRecordTest:

	def test_clean_module_draws_nothing(self):
		rng = np.random.default_rng(0)
		assert record_test(False, OverlookModel(1.), rng) is False
		assert rng.random() == np.random.default_rng(0).random()

	def test_no_overlook(self):
		assert record_test(True, NO_OVERLOOK, np.random.default_rng(0)) is True

	def test_overlook_rate(self):
		rng = np.random.default_rng(1)
		overlooked = sum(not record_test(True, OverlookModel(0.2), rng) for _ in range(100000))
		assert overlooked / 100000 == pytest.approx(0.2, abs=0.01)

	def test_invalid_probability(self):
		with pytest.raises(ValueError):
			OverlookModel(1.5)


class TestMakeOrder:

	def test_single(self):
		assert make_order(1, np.random.default_rng(0)) == [0]

	def test_deterministic(self):
		assert make_order(20, np.random.default_rng(4)) == make_order(20, np.random.default_rng(4))

	def test_uniform(self):
		rng = np.random.default_rng(5)
		n, draws = 5, 20000
		counts = np.zeros((n, n))
		for _ in range(draws):
			counts[np.arange(n), make_order(n, rng)] += 1
		sigma = np.sqrt(draws * (1 / n) * (1 - 1 / n))
		assert np.all(np.abs(counts - draws / n) < 4 * sigma)

	def test_empty(self):
		with pytest.raises(ValueError):
			make_order(0, np.random.default_rng(0))


class TestOutcomeCases:

	@pytest.mark.parametrize('used, truth, recorded, case', [
		(True, False, False, CASE_ALPHA),
		(False, True, True, CASE_BETA),
		(False, True, False, CASE_BETA),
		(True, True, False, CASE_GAMMA),
		(True, True, True, CASE_NONE),
		(False, False, False, CASE_NONE)])
	def test_cases(self, used, truth, recorded, case):
		assert classify_outcome(used, truth, recorded) == case


class TestRunBaseline:

	def run(self, target, models, policy=EpsilonGreedy(0.1), overlook=OverlookModel(0.2), seed=0):
		order = make_order(target.n_modules, np.random.default_rng(seed))
		return run_baseline(models, target, order, policy, overlook, np.random.default_rng(seed + 1),
							noise_rng=np.random.default_rng(seed + 2))

	def test_structure(self, oracle_pair):
		target, models = oracle_pair
		run = self.run(target, models)
		assert len(run.log) == target.n_modules
		assert sorted(run.order) == list(range(target.n_modules))
		assert [e.order for e in run.log] == list(range(1, target.n_modules + 1))
		for entry in run.log:
			assert 0 <= entry.selected_arm < 2
			assert entry.used_prediction == entry.per_arm_prediction[entry.selected_arm]
			assert (entry.effort == 'High') == entry.used_prediction
			assert entry.outcome_case == classify_outcome(entry.used_prediction, entry.true_label,
														  entry.recorded_result)
			assert run.final_prediction[entry.module_id] == entry.used_prediction

	def test_identical_models(self, make_scripted):
		pattern = [True, False, False, True, True, False]
		target, models = make_scripted([1, 0, 1, 1, 0, 0], [pattern, pattern])
		for policy in (EpsilonGreedy(0.3), UCB()):
			run = self.run(target, models, policy=policy)
			assert run.prediction_vector().tolist() == pattern

	def test_greedy_locks_on_correct_arm(self, oracle_pair):
		target, models = oracle_pair
		run = self.run(target, models, policy=EpsilonGreedy(0.), overlook=NO_OVERLOOK)
		better = next(i for i, e in enumerate(run.log) if e.per_arm_auc_after[0] > e.per_arm_auc_after[1])
		assert all(e.selected_arm == 0 for e in run.log[better + 1:])

	def test_deterministic(self, small_registry):
		from banditcpdp.learner import build_arm_models
		models = build_arm_models([small_registry.projects[n] for n in small_registry.learning_names])
		a = self.run(small_registry.target, models, policy=UCB(), seed=3)
		b = self.run(small_registry.target, models, policy=UCB(), seed=3)
		assert a.log == b.log
		assert a.final_prediction == b.final_prediction
		assert a.arms == b.arms

	def test_arms_match_log_recount(self, oracle_pair):
		target, models = oracle_pair
		run = self.run(target, models, seed=7)
		for i, arm in enumerate(run.arms):
			tp = sum(e.per_arm_prediction[i] and e.recorded_result for e in run.log)
			fp = sum(e.per_arm_prediction[i] and not e.recorded_result for e in run.log)
			tn = sum(not e.per_arm_prediction[i] and not e.recorded_result for e in run.log)
			fn = sum(not e.per_arm_prediction[i] and e.recorded_result for e in run.log)
			assert (arm.tp, arm.fp, arm.tn, arm.fn) == (tp, fp, tn, fn)
		assert sum(a.n_selected for a in run.arms) == target.n_modules

	def test_beta_equals_false_negatives(self, oracle_pair):
		target, models = oracle_pair
		run = self.run(target, models, policy=EpsilonGreedy(0.3), seed=11)
		false_negatives = int(np.sum(~run.prediction_vector() & target.labels))
		assert case_counts(run)['beta'] == false_negatives

	def test_prediction_cache(self, oracle_pair):
		target, models = oracle_pair
		predictions, probabilities = prediction_cache(models, target)
		assert predictions.shape == (2, target.n_modules)
		assert predictions[0].tolist() == target.labels.tolist()
		assert np.all((probabilities >= 0.5) == predictions)

	def test_guards(self, oracle_pair):
		target, models = oracle_pair
		rng = np.random.default_rng(0)
		with pytest.raises(ValueError):
			run_baseline(models[:1], target, list(range(target.n_modules)), UCB(), NO_OVERLOOK, rng)
		with pytest.raises(ValueError):
			run_baseline(models, target, [0, 0, 1], UCB(), NO_OVERLOOK, rng)

	def test_clone_is_independent(self, oracle_pair):
		target, models = oracle_pair
		run = self.run(target, models)
		copy = run.clone()
		copy.final_prediction[target.ids[0]] = not copy.final_prediction[target.ids[0]]
		copy.arms[0].tp += 1
		assert run.final_prediction[target.ids[0]] != copy.final_prediction[target.ids[0]]
		assert run.arms[0].tp != copy.arms[0].tp


class TestTrace:

	def test_columns(self, oracle_pair):
		target, models = oracle_pair
		run = run_baseline(models, target, list(range(target.n_modules)), UCB(), NO_OVERLOOK,
						   np.random.default_rng(0))
		frame = trace_frame(run)
		assert len(frame) == target.n_modules
		assert list(frame.columns[:4]) == ['module', 'order', 'pred_modelA', 'pred_modelB']
		assert set(frame['prediction']) <= {'DE', 'ND'}
		assert frame['auc_modelA'].iloc[-1] == run.arms[0].auc

	def test_duplicate_arm_names(self):
		assert arm_labels(['ant', 'ant', 'ivy']) == ['ant_0', 'ant_1', 'ivy']


class TestCorrectArmDominance:

	@pytest.mark.parametrize('policy', [EpsilonGreedy(0.), EpsilonGreedy(0.3), UCB()])
	def test_correct_arm_never_behind(self, make_scripted, policy):
		rng = np.random.default_rng(21)
		for _ in range(20):
			labels = rng.random(40) < 0.3
			predictions = [labels] + [rng.random(40) < 0.5 for _ in range(3)]
			target, models = make_scripted(labels.astype(int), predictions)
			run = run_baseline(models, target, make_order(40, rng), policy, NO_OVERLOOK, rng)
			for entry in run.log:
				aucs = entry.per_arm_auc_after
				assert aucs[0] >= max(aucs[1:])
