import math
import numpy as np
import pytest

from banditcpdp.errors import InvariantError, UndefinedRatioError
from banditcpdp.evaluation import (AVERAGE, CriterionSet, RepetitionResult, _signed_rank_exact_p,
								   _signed_rank_normal_p, _signed_rank_stats, aggregate, baseline_table, cases_table,
								   count_found_defects, diff, final_auc, format_table, NORMAL_APPROX_GAP, rdiff, report_frame,
								   results_cube, retests_table, significance_mark, wilcoxon_signed_rank)


class TestCriteria:

	def test_perfect(self):
		labels = [True, False, True, False]
		assert final_auc(labels, labels) == 1.

	def test_all_defective(self):
		assert final_auc([True] * 4, [True, False, False, True]) == 0.5

	def test_map_input(self):
		prediction = {'t1': True, 't2': False, 't3': True}
		assert count_found_defects(prediction, [True, True, False]) == 1

	def test_found_defects(self):
		labels = np.array([True, False, True, True])
		assert count_found_defects(labels, labels) == 3
		assert count_found_defects([True] * 3, [False] * 3) == 0

	def test_length_mismatch(self):
		with pytest.raises(ValueError):
			final_auc([True], [True, False])


class TestDiff:

	def test_diff(self):
		assert diff(50, 55) == 5
		assert diff(0.607, 0.623) == pytest.approx(0.016)
		assert diff(3., 3.) == 0.

	def test_rdiff(self):
		assert rdiff(50, 55) == pytest.approx(0.1)
		assert rdiff(7., 7.) == 0.

	def test_rdiff_zero(self):
		with pytest.raises(UndefinedRatioError):
			rdiff(0, 3)


class TestWilcoxon:
	"""Two-sided signed-rank test on pairs (a, b), differences b - a."""

	def test_all_equal(self):
		assert wilcoxon_signed_rank([(0.6, 0.6)] * 40) == 1.

	def test_six_positive(self):
		pairs = [(0., d) for d in (1., 2., 3., 4., 5., 6.)]
		assert wilcoxon_signed_rank(pairs) == pytest.approx(0.03125, rel=1e-12)

	def test_reference_value(self):
		"""Signed ranks of [1.5, 2.2, 3.1, 4.0, 5.3] around 3: V = 9, exact p = 0.8125."""
		pairs = [(3., x) for x in (1.5, 2.2, 3.1, 4.0, 5.3)]
		assert wilcoxon_signed_rank(pairs) == pytest.approx(0.8125, rel=1e-10)

	def test_ties_and_zeros(self):
		# |d| = 1, 1, 2, 3 -> ranks 1.5, 1.5, 3, 4; W+ = 6 out of 10
		pairs = [(0., 1.), (0., 1.), (0., 2.), (0., -3.), (5., 5.)]
		assert wilcoxon_signed_rank(pairs) == pytest.approx(0.75)

	def test_symmetry_and_order(self):
		rng = np.random.default_rng(0)
		pairs = rng.normal(size=(10, 2))
		p = wilcoxon_signed_rank(pairs)
		assert wilcoxon_signed_rank(pairs[:, ::-1]) == pytest.approx(p)
		assert wilcoxon_signed_rank(pairs[rng.permutation(10)]) == pytest.approx(p)

	def test_exact_and_normal_agree(self):
		rng = np.random.default_rng(1)
		for _ in range(50):
			pairs = rng.normal(size=(12, 2)) + [0., rng.normal(0., 0.5)]
			positive, ranks = _signed_rank_stats(pairs)
			assert _signed_rank_normal_p(positive, ranks) == pytest.approx(
				_signed_rank_exact_p(positive, ranks), abs=NORMAL_APPROX_GAP)

	def test_normal_gap_bound_at_twelve(self):
		ranks = np.arange(1., 13.)
		gaps = []
		for pattern in range(2 ** 12):
			positive = np.array([(pattern >> i) & 1 == 1 for i in range(12)])
			gaps.append(abs(_signed_rank_exact_p(positive, ranks) - _signed_rank_normal_p(positive, ranks)))
		assert 0.01 < max(gaps) <= NORMAL_APPROX_GAP

	def test_large_sample(self):
		rng = np.random.default_rng(2)
		pairs = np.column_stack([rng.normal(size=40), rng.normal(1., 1., size=40)])
		p = wilcoxon_signed_rank(pairs)
		assert 0. <= p < 0.01

	def test_empty(self):
		with pytest.raises(ValueError):
			wilcoxon_signed_rank([])


def result(repetition, policy='ucb', k=8, found=(10, 12, 13), auc=(0.6, 0.62, 0.63), retests=(0, 5, 7)):
	names = ['baseline', 'retest', 'multiple_retests']
	return RepetitionResult(repetition=repetition, policy=policy, n_projects=k,
							criteria={n: CriterionSet(auc=a, found_defects=f, retests=r)
									  for n, a, f, r in zip(names, auc, found, retests)},
							cases={'alpha': 20, 'beta': 8, 'gamma': 2, 'high_effort': 40})

PAIR = ('baseline', 'retest')


class TestAggregate:

	def test_identical_repetitions(self):
		rows = aggregate([result(r, found=(10, 10, 10), auc=(0.6, 0.6, 0.6)) for r in range(40)])
		for row in rows:
			assert all(v == 0. for v in row.diffs.values())
			assert all(v == 0. for v in row.rdiffs.values())
			assert all(p == 1. for p in row.p_values.values())

	def test_layout(self):
		results = [result(r, policy=p, k=k) for k in (8, 16) for p in ('epsilon:0.1', 'ucb') for r in range(5)]
		rows = aggregate(results)
		assert len(rows) == 2 * 2 * (2 + 1)
		assert [r.policy for r in rows[:3]] == ['epsilon:0.1', 'ucb', AVERAGE]
		row = rows[0]
		assert row.criterion == 'auc'
		assert list(row.diffs) == [('baseline', 'retest'), ('baseline', 'multiple_retests'),
								   ('retest', 'multiple_retests')]
		found = next(r for r in rows if r.criterion == 'found_defects')
		assert found.means['baseline'] == 10.
		assert found.diffs[PAIR] == 2.
		assert found.rdiffs[PAIR] == pytest.approx(0.2)

	def test_p_values_from_pairs(self):
		results = [result(r, found=(10, 10 + 1 + r % 3, 14)) for r in range(10)]
		found = [r for r in aggregate(results) if r.criterion == 'found_defects'][0]
		assert found.p_values[PAIR] == pytest.approx(wilcoxon_signed_rank([(10, 11 + r % 3) for r in range(10)]))
		assert found.p_values[PAIR] < 0.05

	def test_average_row_pools_pairs(self):
		results = [result(r, policy=p, found=(10, 11, 12)) for p in ('epsilon:0', 'ucb') for r in range(3)]
		average = [r for r in aggregate(results) if r.policy == AVERAGE and r.criterion == 'found_defects'][0]
		assert average.p_values[PAIR] == pytest.approx(wilcoxon_signed_rank([(10, 11)] * 6))
		assert average.diffs[PAIR] == 1.

	def test_per_repetition_rdiff(self):
		results = [result(0, found=(10, 20, 20)), result(1, found=(30, 30, 30))]
		row = [r for r in aggregate(results) if r.criterion == 'found_defects'][0]
		assert row.rdiffs[PAIR] == pytest.approx(25 / 20 - 1)
		assert row.rdiffs_per_repetition[PAIR] == pytest.approx(0.5)

	def test_undefined_rdiff(self):
		rows = aggregate([result(r, found=(0, 1, 1)) for r in range(3)])
		row = [r for r in rows if r.criterion == 'found_defects'][0]
		assert math.isnan(row.rdiffs[PAIR])
		assert PAIR in row.undefined
		frame = report_frame(rows)
		found = frame[(frame['criterion'] == 'found_defects') & (frame['policy'] == 'ucb')]
		assert 'B,R' in found['rdiff_undefined'].iloc[0].split(';')

	def test_found_defects_must_not_drop(self):
		with pytest.raises(InvariantError):
			aggregate([result(r, found=(10, 9, 9)) for r in range(3)])

	def test_mixed_approaches(self):
		odd = result(1)
		del odd.criteria['multiple_retests']
		with pytest.raises(ValueError):
			aggregate([result(0), odd])


class TestReports:

	def results(self):
		return [result(r, policy=p, k=k) for k in (8, 16) for p in ('epsilon:0', 'ucb') for r in range(6)]

	def test_cube(self):
		cube = results_cube(self.results())
		assert dict(cube.sizes) == {'policy': 2, 'n_projects': 2, 'repetition': 6, 'approach': 3}
		assert float(cube['found_defects'].sel(policy='ucb', n_projects=8, repetition=0,
											   approach='retest')) == 12.

	def test_baseline_table(self):
		table = baseline_table(results_cube(self.results()))
		assert list(table.columns) == ['policy', 'n_projects', 'auc', 'found_defects']
		assert len(table) == 4 + 2
		assert set(table.loc[table['policy'] == AVERAGE, 'found_defects']) == {10.}

	def test_retests_and_cases(self):
		cube = results_cube(self.results())
		retests = retests_table(cube)
		assert list(retests.columns) == ['policy', 'n_projects', 'retest', 'multiple_retests']
		assert set(retests['multiple_retests']) == {7.}
		cases = cases_table(cube)
		assert set(cases['beta']) == {8.}

	def test_text_table(self):
		text = format_table(aggregate(self.results()))
		assert 'FOUND DEFECTS' in text
		assert 'DIFF (B,R)' in text
		assert '2.000 (0.03)**' in text

	def test_marks(self):
		assert significance_mark(0.04) == '**'
		assert significance_mark(0.07) == '*'
		assert significance_mark(0.2) == ''
