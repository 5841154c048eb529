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

import os
import glob
import hashlib
import logging
from dataclasses import dataclass
import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError

from .errors import DatasetError, ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_ID_COLUMN = 'name'
DEFAULT_LABEL_COLUMN = 'bug'

def binarize_label(defect_count):
	"""A module is defective iff at least one defect was recorded for it."""
	if defect_count < 0:
		raise DatasetError(f"Negative defect count {defect_count}.")
	return bool(defect_count > 0)

@dataclass(frozen=True)
class ModuleRecord:
	id: str
	features: dict
	defect_count: int = 0

	@property
	def label(self):
		return binarize_label(self.defect_count)


class ProjectDataset:
	"""
	A named project: one row per module, CK-style metric columns and the
	recorded defect count of every module.

	name (str): project name
	metric_schema (list): metric names in column order
	ids (sequence of str): module names, unique within the project
	features (array n_modules x n_metrics): finite metric values
	defect_counts (sequence of int): non-negative defect counts
	"""

	def __init__(self, name, metric_schema, ids, features, defect_counts):
		self.name = name
		self.metric_schema = list(metric_schema)
		self.ids = [str(i) for i in ids]
		self.features = np.array(features, dtype=float)
		self.defect_counts = np.asarray(defect_counts, dtype=np.int64)

		if len(self.ids) == 0:
			raise DatasetError(f"Project {name}: empty dataset.")
		if self.features.shape != (len(self.ids), len(self.metric_schema)):
			raise DatasetError(f"Project {name}: features of shape {self.features.shape} for "
							   f"{len(self.ids)} modules and {len(self.metric_schema)} metrics.")
		if len(set(self.metric_schema)) != len(self.metric_schema):
			raise DatasetError(f"Project {name}: duplicate metric names in schema.")
		if self.defect_counts.shape != (len(self.ids),):
			raise DatasetError(f"Project {name}: {len(self.defect_counts)} defect counts for {len(self.ids)} modules.")
		if (self.defect_counts < 0).any():
			row = int(np.flatnonzero(self.defect_counts < 0)[0])
			raise DatasetError(f"Project {name}: negative defect count for module {self.ids[row]}.")
		if not np.isfinite(self.features).all():
			row, col = np.argwhere(~np.isfinite(self.features))[0]
			raise DatasetError(f"Project {name}: non-finite value for module {self.ids[row]}, "
							   f"metric {self.metric_schema[col]}.")
		seen = set()
		for module_id in self.ids:
			if module_id in seen:
				raise DatasetError(f"Project {name}: duplicate module id `{module_id}`.")
			seen.add(module_id)

		self.features.setflags(write=False)
		self.defect_counts.setflags(write=False)
		self._modules = None

	@property
	def labels(self):
		return self.defect_counts > 0

	@property
	def n_modules(self):
		return len(self.ids)

	@property
	def defect_rate(self):
		return float(self.labels.sum()) / self.n_modules

	@property
	def modules(self):
		if self._modules is None:
			self._modules = [self.module(i) for i in range(self.n_modules)]
		return self._modules

	def module(self, index):
		return ModuleRecord(id=self.ids[index],
							features=dict(zip(self.metric_schema, self.features[index].tolist())),
							defect_count=int(self.defect_counts[index]))

	def matrix(self, schema=None):
		"""Feature matrix with columns ordered by `schema` (default: own schema)."""
		if schema is None or list(schema) == self.metric_schema:
			return self.features
		missing = [m for m in schema if m not in self.metric_schema]
		if missing:
			raise DatasetError(f"Project {self.name} lacks metric(s) {missing}.")
		cols = [self.metric_schema.index(m) for m in schema]
		return self.features[:, cols]

	def to_frame(self, id_column=DEFAULT_ID_COLUMN, label_column=DEFAULT_LABEL_COLUMN):
		frame = pd.DataFrame(self.features, columns=self.metric_schema)
		frame.insert(0, id_column, self.ids)
		frame[label_column] = self.defect_counts
		return frame

	def fingerprint(self):
		"""SHA-256 of the canonical comma-separated form."""
		text = self.to_frame().to_csv(index=False, lineterminator='\n')
		return hashlib.sha256(text.encode('utf-8')).hexdigest()

	def __len__(self):
		return self.n_modules

	def __eq__(self, other):
		if not isinstance(other, ProjectDataset):
			return NotImplemented
		return (self.name == other.name
				and self.metric_schema == other.metric_schema
				and self.ids == other.ids
				and np.array_equal(self.features, other.features)
				and np.array_equal(self.defect_counts, other.defect_counts))

	__hash__ = None

	def __repr__(self):
		return ('<ProjectDataset {} modules={} metrics={} defect_rate={:.3f}>'
				.format(self.name, self.n_modules, len(self.metric_schema), self.defect_rate))


class ProjectRegistry:
	"""All projects of an experiment and the name of the prediction target."""

	def __init__(self, projects, target_name):
		if isinstance(projects, (list, tuple)):
			projects = {p.name: p for p in projects}
		self.projects = dict(projects)
		self.target_name = target_name

		if target_name not in self.projects:
			raise DatasetError(f"Target project `{target_name}` not among {sorted(self.projects)}.")

		schema = self.target.metric_schema
		for name, project in self.projects.items():
			if project.metric_schema != schema:
				raise DatasetError(f"Project {name} has metric schema {project.metric_schema}, "
								   f"expected {schema} as in target {target_name}.")

	@property
	def target(self):
		return self.projects[self.target_name]

	@property
	def metric_schema(self):
		return self.target.metric_schema

	@property
	def learning_names(self):
		return [name for name in self.projects if name != self.target_name]

	def fingerprints(self):
		return {name: project.fingerprint() for name, project in self.projects.items()}

	def __repr__(self):
		return '<ProjectRegistry target={} learning_projects={}>'.format(
			self.target_name, len(self.learning_names))


def load_project(path, label_column=DEFAULT_LABEL_COLUMN, id_column=DEFAULT_ID_COLUMN, name=None):
	"""
	Read one project from a header-bearing comma-separated file.

	Every column other than the id and label columns is a metric column.
	Columns without a single numeric cell (e.g. `version` or a file path)
	are descriptive and skipped; any other non-numeric cell is an error.
	The project name defaults to the file stem.
	"""
	if not os.path.isfile(path):
		raise FileNotFoundError(f"{path} not found.")
	if name is None:
		name = os.path.splitext(os.path.basename(path))[0]

	try:
		raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, encoding='utf-8')
	except EmptyDataError:
		raise DatasetError(f"{path}: empty dataset.") from None
	except (pd.errors.ParserError, UnicodeDecodeError) as e:
		raise DatasetError(f"{path}: cannot parse file ({e}).") from None

	header = [h.strip() for h in raw.iloc[0].tolist()]
	duplicates = sorted({h for h in header if header.count(h) > 1})
	if duplicates:
		raise DatasetError(f"{path}: duplicate header column(s) {duplicates}.")
	for column in (id_column, label_column):
		if column not in header:
			raise DatasetError(f"{path}: header lacks column `{column}`.")

	body = raw.iloc[1:].reset_index(drop=True)
	body.columns = header
	if len(body) == 0:
		raise DatasetError(f"{path}: empty dataset.")

	metric_schema = []
	columns = []
	for column in header:
		if column in (id_column, label_column):
			continue
		values = pd.to_numeric(body[column].str.strip(), errors='coerce')
		bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
		if bad.all():
			logger.info("%s: skipping descriptive column `%s`.", path, column)
			continue
		if bad.any():
			row = int(np.flatnonzero(bad)[0])
			# +2: one for the header, one for 1-based line numbers
			raise DatasetError(f"{path}: non-numeric value `{body[column].iloc[row]}` "
							   f"in row {row + 2}, column `{column}`.")
		metric_schema.append(column)
		columns.append(values.to_numpy(dtype=float))

	counts = pd.to_numeric(body[label_column].str.strip(), errors='coerce').to_numpy(dtype=float, na_value=np.nan)
	for row, count in enumerate(counts):
		if not np.isfinite(count) or count != np.floor(count):
			raise DatasetError(f"{path}: invalid defect count `{body[label_column].iloc[row]}` "
							   f"in row {row + 2}, column `{label_column}`.")
		if count < 0:
			raise DatasetError(f"{path}: negative defect count in row {row + 2}, column `{label_column}`.")

	if not columns:
		raise DatasetError(f"{path}: no numeric metric columns.")
	features = np.column_stack(columns)
	dataset = ProjectDataset(name, metric_schema, body[id_column].str.strip().tolist(),
							 features, counts.astype(np.int64))
	logger.info("Loaded %s from %s", dataset, path)
	return dataset

def save_project(dataset, path, label_column=DEFAULT_LABEL_COLUMN, id_column=DEFAULT_ID_COLUMN):
	dataset.to_frame(id_column, label_column).to_csv(path, index=False, lineterminator='\n')
	logger.debug("Wrote %s to %s", dataset.name, path)

def load_registry(directory, target_name, label_column=DEFAULT_LABEL_COLUMN, id_column=DEFAULT_ID_COLUMN):
	"""Load every *.csv of `directory` as a project (name = file stem)."""
	if not os.path.isdir(directory):
		raise FileNotFoundError(f"Dataset directory {directory} not found.")
	paths = sorted(glob.glob(os.path.join(directory, '*.csv')))
	if not paths:
		raise DatasetError(f"No project files (*.csv) in {directory}.")
	projects = [load_project(p, label_column=label_column, id_column=id_column) for p in paths]
	registry = ProjectRegistry(projects, target_name)
	logger.info("Loaded %s from %s", registry, directory)
	return registry

def select_learning_projects(registry, k, rng):
	"""Draw `k` distinct non-target project names uniformly without replacement."""
	candidates = registry.learning_names
	if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k <= 0:
		raise ConfigurationError(f"Number of learning projects must be a positive integer, got {k}.",
								 field='sizes')
	if k > len(candidates):
		raise ConfigurationError(f"Requested {k} learning projects but only {len(candidates)} "
								 f"besides target {registry.target_name} are available.", field='sizes')
	picks = rng.choice(len(candidates), size=int(k), replace=False)
	return [candidates[i] for i in picks]

def generate_synthetic_project(name, n_modules, defect_rate, n_metrics, signal_strength, rng,
							   metric_names=None):
	"""
	Draw a synthetic project.

	Labels are Bernoulli(`defect_rate`) per module. Every metric is normal
	with a project-specific offset; for defective modules its mean moves
	by `signal_strength` times a per-metric weight in [0.5, 1.5]. With
	signal_strength 0 labels are independent of the features.
	"""
	if n_modules < 1 or n_metrics < 1:
		raise ValueError("`n_modules` and `n_metrics` must be positive.")
	if not 0. < defect_rate < 1.:
		raise ValueError(f"`defect_rate` must lie in (0, 1), got {defect_rate}.")
	if signal_strength < 0:
		raise ValueError(f"`signal_strength` must be non-negative, got {signal_strength}.")
	if metric_names is None:
		metric_names = ["m{:02d}".format(i + 1) for i in range(n_metrics)]
	if len(metric_names) != n_metrics:
		raise ValueError(f"{len(metric_names)} metric names given for {n_metrics} metrics.")

	labels = rng.random(n_modules) < defect_rate
	extra = rng.poisson(1.0, n_modules)
	defect_counts = np.where(labels, 1 + extra, 0)

	offsets = rng.normal(0., 0.5, n_metrics)
	weights = rng.uniform(0.5, 1.5, n_metrics)
	noise = rng.normal(0., 1., (n_modules, n_metrics))
	features = noise + offsets + signal_strength * weights * labels[:, None]

	ids = ["{}.C{:04d}".format(name, i) for i in range(n_modules)]
	return ProjectDataset(name, metric_names, ids, features, defect_counts)

def generate_synthetic_registry(suite, target_name='arc', target_modules=235, target_defect_rate=0.115,
								target_signal=0.8, n_metrics=20, signal_range=None, rng=None):
	"""
	Build a target project and one learning project per name of `suite`.

	Per learning project the module count, defect rate and signal strength
	are drawn from the suite's ranges (`signal_range` overrides the suite's
	signal range).
	"""
	if rng is None:
		raise ValueError("A seeded `rng` is required.")
	metrics = list(suite['metrics'])[:n_metrics]
	metrics += ["m{:02d}".format(i + 1) for i in range(len(metrics), n_metrics)]
	lo_mod, hi_mod = suite['modules']
	lo_rate, hi_rate = suite['defect_rate']
	lo_sig, hi_sig = signal_range if signal_range is not None else suite['signal']

	projects = [generate_synthetic_project(target_name, target_modules, target_defect_rate,
										   n_metrics, target_signal, rng, metric_names=metrics)]
	for name in suite['projects']:
		if name == target_name:
			continue
		n_modules = int(rng.integers(lo_mod, hi_mod + 1))
		rate = float(rng.uniform(lo_rate, hi_rate))
		signal = float(rng.uniform(lo_sig, hi_sig))
		projects.append(generate_synthetic_project(name, n_modules, rate, n_metrics, signal, rng,
												   metric_names=metrics))
	registry = ProjectRegistry(projects, target_name)
	logger.info("Generated synthetic %s", registry)
	return registry
