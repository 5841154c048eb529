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

import itertools
import logging
import math
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
import xarray as xr
from scipy.stats import norm, rankdata
from toolz import groupby

from .bandit import arm_auc
from .errors import InvariantError, UndefinedRatioError

logger = logging.getLogger(__name__)

CRITERIA = ('auc', 'found_defects')
CASE_FIELDS = ('alpha', 'beta', 'gamma', 'high_effort')
EXACT_MAX_N = 25
# Largest |exact - normal| p-value gap over all 4096 sign patterns of 12
# distinct ranks is 0.0137.
NORMAL_APPROX_GAP = 0.014
AVERAGE = 'Average'
SHORT_NAMES = {'baseline': 'B', 'retest': 'R', 'multiple_retests': 'MR'}


@dataclass(frozen=True)
class CriterionSet:
	auc: float
	found_defects: int
	retests: int = 0

	def __post_init__(self):
		if not 0. <= self.auc <= 1.:
			raise ValueError(f"AUC must lie in [0, 1], got {self.auc}.")
		if self.found_defects < 0 or self.retests < 0:
			raise ValueError("Counts must be non-negative.")


@dataclass
class RepetitionResult:
	"""Criteria of every approach for one (policy, size, repetition), on one shared baseline trace."""
	repetition: int
	policy: str
	n_projects: int
	criteria: dict
	seeds: dict = field(default_factory=dict)
	cases: dict = field(default_factory=dict)
	learning_projects: list = field(default_factory=list)

	@property
	def key(self):
		return (self.policy, self.n_projects)


@dataclass
class ReportRow:
	policy: str
	n_projects: int
	criterion: str
	means: dict
	diffs: dict
	rdiffs: dict
	rdiffs_per_repetition: dict
	p_values: dict
	undefined: tuple = ()


## Criteria

def _as_vectors(final_prediction, true_labels):
	if isinstance(final_prediction, dict):
		predicted = np.fromiter(final_prediction.values(), dtype=bool, count=len(final_prediction))
	else:
		predicted = np.asarray(final_prediction, dtype=bool)
	labels = np.asarray(true_labels, dtype=bool)
	if predicted.shape != labels.shape:
		raise ValueError(f"{predicted.size} predictions for {labels.size} labels.")
	return predicted, labels

def final_auc(final_prediction, true_labels):
	"""(TPR + TNR) / 2 of final predictions against ground truth; 0.5 if a class is absent."""
	predicted, labels = _as_vectors(final_prediction, true_labels)
	if predicted.size == 0:
		raise ValueError("Cannot evaluate an empty prediction.")
	tp = int(np.sum(predicted & labels))
	fp = int(np.sum(predicted & ~labels))
	tn = int(np.sum(~predicted & ~labels))
	fn = int(np.sum(~predicted & labels))
	return arm_auc(tp, fp, tn, fn)

def count_found_defects(final_prediction, true_labels):
	predicted, labels = _as_vectors(final_prediction, true_labels)
	return int(np.sum(predicted & labels))

def evaluate_run(run, retests=0):
	labels = run.true_labels
	predicted = run.prediction_vector()
	return CriterionSet(auc=final_auc(predicted, labels),
						found_defects=count_found_defects(predicted, labels),
						retests=retests)

def diff(a, b):
	"""Criterion of the second approach minus the first; positive means improvement."""
	return b - a

def rdiff(a, b):
	"""Relative difference b / a - 1."""
	if a == 0:
		raise UndefinedRatioError(f"RDIFF undefined for a zero reference value (b={b}).")
	return b / a - 1.


## Wilcoxon signed-rank test

def _signed_rank_stats(pairs):
	pairs = np.asarray(pairs, dtype=float)
	if pairs.size == 0:
		raise ValueError("Wilcoxon test needs at least one pair.")
	if pairs.ndim != 2 or pairs.shape[1] != 2:
		raise ValueError(f"Expected a sequence of pairs, got shape {pairs.shape}.")
	d = pairs[:, 1] - pairs[:, 0]
	d = d[d != 0]
	if d.size == 0:
		return None, None
	ranks = rankdata(np.abs(d))
	return d > 0, ranks

def _signed_rank_exact_p(positive, ranks):
	"""Exact two-sided p by enumerating sign assignments; ranks are multiples of 1/2."""
	doubled = np.rint(2 * ranks).astype(int)
	total = int(doubled.sum())
	counts = np.zeros(total + 1)
	counts[0] = 1.
	for r in doubled:
		shifted = np.zeros_like(counts)
		shifted[r:] = counts[:total + 1 - r]
		counts = counts + shifted
	probs = counts / 2. ** len(doubled)
	w = int(doubled[positive].sum())
	lower = probs[:w + 1].sum()
	upper = probs[w:].sum()
	return float(min(1., 2. * min(lower, upper)))

def _signed_rank_normal_p(positive, ranks):
	"""Two-sided p from the normal approximation with tie and continuity corrections."""
	n = len(ranks)
	w = ranks[positive].sum()
	mean = n * (n + 1) / 4.
	_, tie_sizes = np.unique(ranks, return_counts=True)
	var = n * (n + 1) * (2 * n + 1) / 24. - np.sum(tie_sizes ** 3 - tie_sizes) / 48.
	if var <= 0:
		return 1.
	d = w - mean
	d = d - 0.5 * np.sign(d)
	return float(min(1., 2. * norm.sf(abs(d) / math.sqrt(var))))

def wilcoxon_signed_rank(pairs):
	"""
	Two-sided Wilcoxon signed-rank p-value of paired values (a, b).

	Zero differences are dropped and tied absolute differences share their
	average rank. Up to 25 remaining pairs the null distribution is
	enumerated exactly, beyond that the normal approximation is used.
	All differences zero gives p = 1.
	"""
	positive, ranks = _signed_rank_stats(pairs)
	if ranks is None:
		return 1.
	if len(ranks) <= EXACT_MAX_N:
		return _signed_rank_exact_p(positive, ranks)
	return _signed_rank_normal_p(positive, ranks)


## Aggregation

def _short(name):
	kind, _, arg = name.partition(':')
	return SHORT_NAMES.get(kind, kind) + arg

def approach_pairs(approaches):
	return list(itertools.combinations(approaches, 2))

def pair_label(pair):
	return '{},{}'.format(_short(pair[0]), _short(pair[1]))

def _safe_rdiff(a, b):
	try:
		return rdiff(a, b)
	except UndefinedRatioError:
		return math.nan

def _check_group(key, group):
	approaches = list(group[0].criteria)
	for r in group:
		if list(r.criteria) != approaches:
			raise ValueError(f"Results of {key} evaluate different approaches: {approaches} vs {list(r.criteria)}.")
	reps = [r.repetition for r in group]
	if len(set(reps)) != len(reps):
		raise ValueError(f"Duplicate repetitions in {key}.")
	return approaches

def _criterion_row(policy, n_projects, criterion, values, pairs):
	"""`values` maps approach to the per-repetition values, in repetition order."""
	means = {a: float(np.mean(v)) for a, v in values.items()}
	row = ReportRow(policy=policy, n_projects=n_projects, criterion=criterion, means=means,
					diffs={}, rdiffs={}, rdiffs_per_repetition={}, p_values={})
	undefined = []
	for pair in pairs:
		a, b = pair
		row.diffs[pair] = diff(means[a], means[b])
		row.rdiffs[pair] = _safe_rdiff(means[a], means[b])
		if math.isnan(row.rdiffs[pair]):
			undefined.append(pair)
			logger.warning("RDIFF(%s, %s) of %s undefined for %s, %s projects", a, b, criterion, policy, n_projects)
		per_rep = [_safe_rdiff(x, y) for x, y in zip(values[a], values[b])]
		per_rep = [v for v in per_rep if not math.isnan(v)]
		row.rdiffs_per_repetition[pair] = float(np.mean(per_rep)) if per_rep else math.nan
		row.p_values[pair] = wilcoxon_signed_rank(list(zip(values[a], values[b])))
	row.undefined = tuple(undefined)
	return row

def _check_found_defects(row):
	diffs = {(a.partition(':')[0], b.partition(':')[0]): v for (a, b), v in row.diffs.items()}
	for pair in (('baseline', 'retest'), ('retest', 'multiple_retests')):
		if pair in diffs and diffs[pair] < 0:
			raise InvariantError(f"Found defects decreased from {pair[0]} to {pair[1]} "
								 f"for {row.policy}, {row.n_projects} projects.")

def aggregate(results):
	"""
	Report rows per (policy, size, criterion) plus an Average row per size and criterion.

	DIFF and RDIFF are taken between the means over repetitions; the
	p-values come from the Wilcoxon test on the paired per-repetition
	values. Rows are ordered by size, criterion and policy.
	"""
	if not results:
		return []
	groups = groupby(lambda r: r.key, results)
	rows = []
	for n_projects in sorted({size for _, size in groups}):
		keys = sorted(k for k in groups if k[1] == n_projects)
		for criterion in CRITERIA:
			entries = []
			for key in keys:
				group = sorted(groups[key], key=lambda r: r.repetition)
				approaches = _check_group(key, group)
				values = {a: [getattr(r.criteria[a], criterion) for r in group] for a in approaches}
				row = _criterion_row(key[0], n_projects, criterion, values, approach_pairs(approaches))
				if criterion == 'found_defects':
					_check_found_defects(row)
				rows.append(row)
				entries.append((row, values))
			if len({tuple(r.means) for r, _ in entries}) > 1:
				raise ValueError(f"Policies of size {n_projects} evaluate different approaches.")
			rows.append(_average_row(n_projects, criterion, entries))
	return rows

def _average_row(n_projects, criterion, entries):
	approaches = list(entries[0][0].means)
	pairs = approach_pairs(approaches)

	def nanmean(xs):
		xs = [x for x in xs if not math.isnan(x)]
		return float(np.mean(xs)) if xs else math.nan

	row = ReportRow(policy=AVERAGE, n_projects=n_projects, criterion=criterion,
					means={a: float(np.mean([r.means[a] for r, _ in entries])) for a in approaches},
					diffs={}, rdiffs={}, rdiffs_per_repetition={}, p_values={})
	for pair in pairs:
		a, b = pair
		row.diffs[pair] = float(np.mean([r.diffs[pair] for r, _ in entries]))
		row.rdiffs[pair] = nanmean([r.rdiffs[pair] for r, _ in entries])
		row.rdiffs_per_repetition[pair] = nanmean([r.rdiffs_per_repetition[pair] for r, _ in entries])
		pooled_pairs = [p for _, values in entries for p in zip(values[a], values[b])]
		row.p_values[pair] = wilcoxon_signed_rank(pooled_pairs)
	row.undefined = tuple(p for p in pairs if math.isnan(row.rdiffs[p]))
	return row


## Reports

def report_frame(rows):
	"""Table of DIFF, RDIFF and p-values per row, full precision."""
	records = []
	for row in rows:
		record = {'policy': row.policy, 'n_projects': row.n_projects, 'criterion': row.criterion}
		record.update({'mean_' + _short(a): v for a, v in row.means.items()})
		for pair, v in row.diffs.items():
			record['DIFF({})'.format(pair_label(pair))] = v
		for pair, v in row.rdiffs.items():
			record['RDIFF({})'.format(pair_label(pair))] = v
		for pair, v in row.rdiffs_per_repetition.items():
			record['RDIFF_rep({})'.format(pair_label(pair))] = v
		for pair, v in row.p_values.items():
			record['p({})'.format(pair_label(pair))] = v
		record['rdiff_undefined'] = ';'.join(pair_label(p) for p in row.undefined)
		records.append(record)
	return pd.DataFrame.from_records(records)

def significance_mark(p):
	if p < 0.05:
		return '**'
	if p < 0.1:
		return '*'
	return ''

def _cell(value, p, percent=False):
	if math.isnan(value):
		text = 'undef'
	elif percent:
		text = '{:.1f}%'.format(100. * value)
	else:
		text = '{:.3f}'.format(value)
	return '{} ({:.2f}){}'.format(text, p, significance_mark(p))

def format_table(rows):
	"""Plain-text DIFF/RDIFF table per criterion; p-values to 2 decimals with significance marks."""
	blocks = []
	for criterion in CRITERIA:
		selected = [r for r in rows if r.criterion == criterion]
		if not selected:
			continue
		records = []
		for row in selected:
			record = {'Size': row.n_projects, 'Policy': row.policy}
			for pair, v in row.diffs.items():
				record['DIFF ({})'.format(pair_label(pair))] = _cell(v, row.p_values[pair])
			for pair, v in row.rdiffs.items():
				record['RDIFF ({})'.format(pair_label(pair))] = _cell(v, row.p_values[pair], percent=True)
			records.append(record)
		frame = pd.DataFrame.from_records(records)
		blocks.append('{}\n{}'.format(criterion.replace('_', ' ').upper(), frame.to_string(index=False)))
	return '\n\n'.join(blocks) + '\n'


## Results cube

def results_cube(results):
	"""
	xarray Dataset of all repetition results.

	Criteria have dims (policy, n_projects, repetition, approach), case
	tallies (policy, n_projects, repetition). Missing cells are NaN.
	"""
	if not results:
		raise ValueError("No results to collect.")
	policies = list(dict.fromkeys(r.policy for r in results))
	sizes = sorted({r.n_projects for r in results})
	repetitions = sorted({r.repetition for r in results})
	approaches = list(dict.fromkeys(a for r in results for a in r.criteria))

	shape = (len(policies), len(sizes), len(repetitions), len(approaches))
	data = {c: np.full(shape, np.nan) for c in CRITERIA + ('retests',)}
	cases = {c: np.full(shape[:3], np.nan) for c in CASE_FIELDS}
	for r in results:
		i, j, k = policies.index(r.policy), sizes.index(r.n_projects), repetitions.index(r.repetition)
		for a, crit in r.criteria.items():
			l = approaches.index(a)
			data['auc'][i, j, k, l] = crit.auc
			data['found_defects'][i, j, k, l] = crit.found_defects
			data['retests'][i, j, k, l] = crit.retests
		for c in CASE_FIELDS:
			if c in r.cases:
				cases[c][i, j, k] = r.cases[c]

	dims = ('policy', 'n_projects', 'repetition', 'approach')
	variables = {c: (dims, v) for c, v in data.items()}
	variables.update({'case_' + c: (dims[:3], v) for c, v in cases.items()})
	return xr.Dataset(variables, coords={'policy': policies, 'n_projects': sizes,
										 'repetition': repetitions, 'approach': approaches})

def _with_average(frame):
	average = frame.groupby('n_projects', sort=True).mean(numeric_only=True).reset_index()
	average.insert(0, 'policy', AVERAGE)
	return pd.concat([frame, average], ignore_index=True)

def baseline_table(cube):
	"""Mean AUC and found defects of the baseline approach per policy and size."""
	baseline = cube.sel(approach='baseline').mean('repetition')
	frame = pd.DataFrame({c: baseline[c].to_series() for c in CRITERIA}).reset_index()
	return _with_average(frame.dropna())

def retests_table(cube):
	"""Mean number of retests per policy, size and retesting approach."""
	retesting = [str(a) for a in cube.approach.values if a != 'baseline']
	if not retesting:
		return pd.DataFrame(columns=['policy', 'n_projects'])
	means = cube['retests'].sel(approach=retesting).mean('repetition')
	frame = means.to_series().unstack('approach')[retesting].reset_index().dropna()
	frame.columns.name = None
	return _with_average(frame)

def cases_table(cube):
	"""Mean outcome-case tallies of the baseline traces."""
	means = cube.mean('repetition')
	frame = pd.DataFrame({c: means['case_' + c].to_series() for c in CASE_FIELDS}).reset_index()
	return _with_average(frame.dropna())

def format_baseline_table(frame):
	text = frame.copy()
	text['auc'] = text['auc'].map('{:.3f}'.format)
	text['found_defects'] = text['found_defects'].map('{:.1f}'.format)
	return text.rename(columns={'policy': 'Policy', 'n_projects': 'Size', 'auc': 'AUC',
								'found_defects': 'Found defects'}).to_string(index=False) + '\n'
