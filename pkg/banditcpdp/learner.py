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
from collections import namedtuple
from dataclasses import dataclass
from multiprocessing import Pool
import numpy as np
import yaml
from scipy import linalg
from scipy.special import expit

from .errors import DatasetError, SelectionError, TrainingError
from .utils import make_optional_progressbar

logger = logging.getLogger(__name__)

L2_PENALTY = 1e-4
GRADIENT_TOL = 1e-6
MAX_ITERATIONS = 10000
DEFAULT_THRESHOLD = 0.5

LogisticFit = namedtuple('LogisticFit', ['weights', 'bias', 'losses', 'iterations', 'converged'])


@dataclass(frozen=True, eq=False)
class StandardizationParams:
	mean: np.ndarray
	scale: np.ndarray

	def transform(self, feature_matrix):
		return (np.asarray(feature_matrix, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True)
class FeatureSubset:
	indices: tuple
	merit: float

	def __post_init__(self):
		if len(self.indices) == 0:
			raise ValueError("Feature subset must not be empty.")
		if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
			raise ValueError(f"Feature subset indices {self.indices} must be strictly increasing.")
		if self.indices[0] < 0:
			raise ValueError(f"Negative feature index in {self.indices}.")


@dataclass(frozen=True, eq=False)
class DefectModel:
	"""
	One arm: a logistic model trained on a single learning project.

	metric_schema (tuple): the full training schema; standardization covers
		all of it, the subset picks the columns the weights apply to
	"""
	source_project: str
	metric_schema: tuple
	standardization: StandardizationParams
	subset: FeatureSubset
	weights: np.ndarray
	bias: float
	threshold: float = DEFAULT_THRESHOLD

	def __post_init__(self):
		if len(self.weights) != len(self.subset.indices):
			raise ValueError(f"{len(self.weights)} weights for {len(self.subset.indices)} selected features.")
		if self.subset.indices[-1] >= len(self.metric_schema):
			raise ValueError("Feature subset exceeds the metric schema.")
		if not np.isfinite(self.weights).all() or not np.isfinite(self.bias):
			raise ValueError(f"Non-finite weights in model of {self.source_project}.")
		if not 0. < self.threshold < 1.:
			raise ValueError(f"Threshold must lie in (0, 1), got {self.threshold}.")

	@property
	def subset_metrics(self):
		return [self.metric_schema[i] for i in self.subset.indices]

	def scores(self, feature_matrix):
		"""Linear scores of rows ordered by `metric_schema`."""
		idx = list(self.subset.indices)
		x = ((np.asarray(feature_matrix, dtype=float)[:, idx] - self.standardization.mean[idx])
			 / self.standardization.scale[idx])
		return x @ self.weights + self.bias

	def predict_probs(self, feature_matrix):
		return expit(self.scores(feature_matrix))

	def __repr__(self):
		return '<DefectModel {} features={} merit={:.3f}>'.format(
			self.source_project, self.subset_metrics, self.subset.merit)


## Standardization and correlation

def standardize_fit(feature_matrix):
	"""Column means and sample standard deviations (n-1); constant columns get scale 1."""
	x = np.asarray(feature_matrix, dtype=float)
	if x.ndim != 2 or x.shape[0] < 2:
		raise ValueError("Standardization needs at least 2 rows.")
	mean = x.mean(axis=0)
	scale = x.std(axis=0, ddof=1)
	scale = np.where(scale > 0., scale, 1.)
	return StandardizationParams(mean=mean, scale=scale)

def pearson(x, y):
	x = np.asarray(x, dtype=float)
	y = np.asarray(y, dtype=float)
	if x.shape != y.shape:
		raise ValueError(f"Length mismatch: {x.shape} vs {y.shape}.")
	if x.size < 2:
		raise ValueError("Pearson correlation needs at least 2 values.")
	xc = x - x.mean()
	yc = y - y.mean()
	sxx = np.dot(xc, xc)
	syy = np.dot(yc, yc)
	if sxx == 0. or syy == 0.:
		return 0.
	return float(np.clip(np.dot(xc, yc) / np.sqrt(sxx * syy), -1., 1.))

def _unit_columns(x):
	# centred columns of unit norm; constant columns become zero
	xc = x - x.mean(axis=0)
	norms = np.sqrt((xc * xc).sum(axis=0))
	with np.errstate(invalid='ignore', divide='ignore'):
		return np.where(norms > 0., xc / norms, 0.)


## Correlation-based feature selection

def cfs_merit(indices, r_cf, r_ff):
	"""
	Merit of a subset: k * mean(r_cf) / sqrt(k + k(k-1) * mean(r_ff)),
	with absolute correlations and r_ff averaged over distinct pairs.
	"""
	indices = list(indices)
	k = len(indices)
	rcf = float(np.mean([r_cf[i] for i in indices]))
	if k > 1:
		sub = r_ff[np.ix_(indices, indices)]
		rff = float(sub[np.triu_indices(k, 1)].mean())
	else:
		rff = 0.
	return k * rcf / np.sqrt(k + k * (k - 1) * rff)

def cfs_select(feature_matrix, labels):
	"""
	Greedy forward CFS with Pearson correlations.

	Starts from the feature best correlated with the labels and adds, one
	at a time, the feature giving the largest merit, while merit strictly
	increases. Ties go to the lowest column.
	"""
	x = np.asarray(feature_matrix, dtype=float)
	y = np.asarray(labels, dtype=bool)
	if x.ndim != 2 or x.shape[0] < 2:
		raise SelectionError("Feature selection needs at least 2 rows.")
	if y.shape[0] != x.shape[0]:
		raise ValueError(f"{y.shape[0]} labels for {x.shape[0]} rows.")
	if y.all() or not y.any():
		raise SelectionError("Feature selection needs both classes in the labels.")

	z = _unit_columns(x)
	zy = _unit_columns(y.astype(float)[:, None])[:, 0]
	r_cf = np.abs(np.clip(z.T @ zy, -1., 1.))
	r_ff = np.abs(np.clip(z.T @ z, -1., 1.))

	n_features = x.shape[1]
	if not (r_cf > 0.).any():
		logger.warning("No feature correlates with the labels; keeping all %d features.", n_features)
		return FeatureSubset(indices=tuple(range(n_features)), merit=0.)

	selected = [int(np.argmax(r_cf))]
	merit = cfs_merit(selected, r_cf, r_ff)
	while len(selected) < n_features:
		best_gain, best_feature = merit, None
		for j in range(n_features):
			if j in selected:
				continue
			candidate = cfs_merit(selected + [j], r_cf, r_ff)
			if candidate > best_gain:
				best_gain, best_feature = candidate, j
		if best_feature is None:
			break
		selected.append(best_feature)
		merit = best_gain

	return FeatureSubset(indices=tuple(sorted(selected)), merit=float(merit))


## Logistic regression

def logistic_loss_and_grad(params, feature_matrix, labels, l2=L2_PENALTY):
	"""
	Mean negative log-likelihood + l2 * ||w||^2 and its gradient.

	params = [w_1 .. w_d, b]; the bias is not penalized.
	"""
	x = np.asarray(feature_matrix, dtype=float)
	y = np.asarray(labels, dtype=float)
	w, b = params[:-1], params[-1]
	z = x @ w + b
	loss = np.mean(np.logaddexp(0., z) - y * z) + l2 * np.dot(w, w)
	residual = expit(z) - y
	grad = np.empty_like(params, dtype=float)
	grad[:-1] = x.T @ residual / len(y) + 2. * l2 * w
	grad[-1] = residual.mean()
	return float(loss), grad

def _hessian(params, x, l2):
	z = x @ params[:-1] + params[-1]
	p = expit(z)
	s = p * (1. - p)
	a = np.hstack((x, np.ones((x.shape[0], 1))))
	h = (a.T * s) @ a / x.shape[0]
	h[np.diag_indices(x.shape[1])] += 2. * l2
	h[-1, -1] += 1e-12
	return h

def fit_logistic(feature_matrix, labels, l2=L2_PENALTY, tol=GRADIENT_TOL, max_iter=MAX_ITERATIONS):
	"""
	Damped Newton iterations from zero weights with Armijo backtracking.

	Every accepted step lowers (never raises) the loss, so `losses` is
	non-increasing. Stops when the gradient max-norm falls below `tol`,
	when no step can lower the loss any more, or after `max_iter` steps.
	"""
	x = np.asarray(feature_matrix, dtype=float)
	y = np.asarray(labels, dtype=bool)
	if x.ndim != 2 or x.shape[0] < 2:
		raise TrainingError("Logistic training needs at least 2 rows.")
	if y.all() or not y.any():
		raise TrainingError("one-class training data")

	params = np.zeros(x.shape[1] + 1)
	loss, grad = logistic_loss_and_grad(params, x, y, l2)
	losses = [loss]
	converged = False
	iteration = 0
	for iteration in range(1, max_iter + 1):
		if np.max(np.abs(grad)) < tol:
			converged = True
			break
		try:
			direction = linalg.solve(_hessian(params, x, l2), grad, assume_a='pos')
		except (linalg.LinAlgError, ValueError):
			direction = grad
		if not np.isfinite(direction).all() or np.dot(direction, grad) <= 0.:
			direction = grad

		step = 1.
		slope = np.dot(grad, direction)
		while step > 1e-14:
			candidate = params - step * direction
			new_loss, new_grad = logistic_loss_and_grad(candidate, x, y, l2)
			if np.isfinite(new_loss) and new_loss <= loss - 1e-4 * step * slope:
				break
			step *= 0.5
		else:
			# no representable decrease left
			converged = np.max(np.abs(grad)) < np.sqrt(tol)
			break

		params, loss, grad = candidate, new_loss, new_grad
		losses.append(loss)

	if not np.isfinite(loss):
		raise TrainingError("non-finite loss during logistic training")
	return LogisticFit(weights=params[:-1].copy(), bias=float(params[-1]),
					   losses=losses, iterations=iteration, converged=converged)

def train_logistic(feature_matrix, labels, l2=L2_PENALTY):
	fit = fit_logistic(feature_matrix, labels, l2=l2)
	if not fit.converged:
		logger.debug("Logistic training stopped after %d iterations without reaching tolerance.", fit.iterations)
	return fit.weights, fit.bias


## Prediction

def _module_vector(model, module):
	vec = np.zeros(len(model.metric_schema))
	for i in model.subset.indices:
		metric = model.metric_schema[i]
		if metric not in module.features:
			raise DatasetError(f"Module {module.id} lacks metric `{metric}` required by model of "
							   f"{model.source_project}.")
		vec[i] = module.features[metric]
	return vec

def predict_prob(model, module):
	return float(model.predict_probs(_module_vector(model, module)[None, :])[0])

def predict_label(model, module):
	"""Defective (True) when the probability reaches the threshold; ties are defective."""
	return predict_prob(model, module) >= model.threshold

def predict_probs(model, dataset):
	"""Probabilities for every module of `dataset`, in dataset order."""
	return model.predict_probs(dataset.matrix(model.metric_schema))


## Arm models

def train_model(project, l2=L2_PENALTY, threshold=DEFAULT_THRESHOLD):
	"""Standardize, select features with CFS and fit the logistic model of one project."""
	labels = project.labels
	if labels.all() or not labels.any():
		raise TrainingError(f"Project {project.name}: one-class training data")
	std = standardize_fit(project.features)
	z = std.transform(project.features)
	subset = cfs_select(z, labels)
	weights, bias = train_logistic(z[:, list(subset.indices)], labels, l2=l2)
	model = DefectModel(source_project=project.name,
						metric_schema=tuple(project.metric_schema),
						standardization=std,
						subset=subset,
						weights=weights,
						bias=bias,
						threshold=threshold)
	logger.debug("Trained %s", model)
	return model

def _train_or_reason(project):
	try:
		return project.name, train_model(project), None
	except (SelectionError, TrainingError, ValueError) as e:
		return project.name, None, str(e)

def train_models(projects, nprocesses=1, show_progress=False):
	"""
	Train every project independently.

	Returns (models by name, failure reason by name). Runs in-process when
	`nprocesses` is 1, else on a process pool (None: all processors).
	"""
	projects = list(projects)
	if nprocesses == 1 or len(projects) < 2:
		maybe_progressbar = make_optional_progressbar(show_progress, 'Train arms', len(projects))
		outcomes = [_train_or_reason(p) for p in maybe_progressbar(projects)]
	else:
		pool = Pool(processes=nprocesses)
		try:
			outcomes = pool.map(_train_or_reason, projects)
		except Exception as e:
			pool.terminate()
			logger.info("Arm training has been interrupted by an exception.")
			raise e
		pool.close()
		pool.join()

	models, failures = {}, {}
	for name, model, reason in outcomes:
		if model is None:
			logger.warning("Dropping arm %s: %s", name, reason)
			failures[name] = reason
		else:
			models[name] = model
	return models, failures

def build_arm_models(learning_projects, nprocesses=1, show_progress=False):
	"""One model per learning project, in input order; untrainable projects are dropped."""
	models, _ = train_models(learning_projects, nprocesses=nprocesses, show_progress=show_progress)
	arms = [models[p.name] for p in learning_projects if p.name in models]
	if len(arms) < 2:
		raise TrainingError(f"fewer than 2 arms: {len(arms)} of {len(learning_projects)} "
							f"learning projects could be trained")
	logger.info("Built %d arm models", len(arms))
	return arms


## Text form

def model_to_text(model):
	"""YAML text of a model (project, schema, subset, standardization, weights, bias)."""
	return yaml.safe_dump({
		'project': model.source_project,
		'threshold': float(model.threshold),
		'bias': float(model.bias),
		'merit': float(model.subset.merit),
		'metrics': list(model.metric_schema),
		'means': [float(v) for v in model.standardization.mean],
		'scales': [float(v) for v in model.standardization.scale],
		'subset': [model.metric_schema[i] for i in model.subset.indices],
		'weights': [float(v) for v in model.weights],
	}, sort_keys=False)

def model_from_text(text):
	conf = yaml.safe_load(text)
	metrics = tuple(conf['metrics'])
	return DefectModel(source_project=conf['project'],
					   metric_schema=metrics,
					   standardization=StandardizationParams(mean=np.array(conf['means'], dtype=float),
															 scale=np.array(conf['scales'], dtype=float)),
					   subset=FeatureSubset(indices=tuple(metrics.index(m) for m in conf['subset']),
											merit=float(conf['merit'])),
					   weights=np.array(conf['weights'], dtype=float),
					   bias=float(conf['bias']),
					   threshold=float(conf['threshold']))
