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

Experiment driver: configuration, the (size x policy x repetition)
matrix, reports, manifests and traces.
"""

import logging
import os
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Optional
import pandas as pd
import yaml

from . import config as site_config #pylint: disable=E0611
from ._version import __version__
from .bandit import REWARD_MODES, parse_policy
from .dataset import (DEFAULT_ID_COLUMN, DEFAULT_LABEL_COLUMN, generate_synthetic_registry,
					  load_registry, select_learning_projects)
from .errors import ConfigurationError, InvariantError, TrainingError
from .evaluation import (aggregate, baseline_table, cases_table, evaluate_run, format_baseline_table,
						 format_table, report_frame, results_cube, retests_table, RepetitionResult)
from .learner import train_models
from .reprediction import BASELINE, RESELECTION_MODES, count_retests, parse_approach, retest_frame, run_approach
from .resource import get_experiment_preset, get_synthetic_suite
from .simulator import NO_OVERLOOK, OverlookModel, case_counts, make_order, run_baseline, trace_frame
from .utils import STREAMS, make_optional_progressbar, mix_seed, repetition_seed, substream, substream_seed

logger = logging.getLogger(__name__)

DEFAULT_PRESET = 'replication'
# `dataset: site` reads the directory from the site configuration
SITE_DATASET = 'site'
DATASET_KEYS = ('directory', 'label_column', 'id_column')
SYNTHETIC_KEYS = ('suite', 'n_metrics', 'target_modules', 'target_defect_rate', 'target_signal', 'signal_range')
CONFIG_KEYS = ('preset', 'dataset', 'synthetic', 'target', 'sizes', 'policies', 'approaches', 'repetitions',
			   'p_overlook', 'seed', 'reward_auc', 'retest_noise', 'resample_projects',
			   'reprediction_selection', 'output_dir', 'nprocesses', 'emit_traces')


@dataclass(frozen=True)
class ExperimentConfig:
	target: str
	sizes: tuple
	policies: tuple
	approaches: tuple
	repetitions: int
	p_overlook: float
	seed: int
	dataset_dir: Optional[str] = None
	label_column: str = DEFAULT_LABEL_COLUMN
	id_column: str = DEFAULT_ID_COLUMN
	synthetic: dict = field(default_factory=dict)
	reward_auc: str = 'binary'
	retest_noise: bool = True
	resample_projects: bool = True
	reprediction_selection: str = 'greedy'
	output_dir: Optional[str] = None
	nprocesses: Optional[int] = None
	emit_traces: bool = False

	@property
	def overlook(self):
		return OverlookModel(self.p_overlook)

	@property
	def retest_overlook(self):
		return self.overlook if self.retest_noise else NO_OVERLOOK

	def to_dict(self):
		"""Settings in config file form; `config_from_dict(c.to_dict())` equals `c`."""
		return {
			'dataset': (None if self.dataset_dir is None else
						{'directory': self.dataset_dir, 'label_column': self.label_column,
						 'id_column': self.id_column}),
			'synthetic': dict(self.synthetic),
			'target': self.target,
			'sizes': list(self.sizes),
			'policies': [p.name for p in self.policies],
			'approaches': [a.name for a in self.approaches],
			'repetitions': self.repetitions,
			'p_overlook': self.p_overlook,
			'seed': self.seed,
			'reward_auc': self.reward_auc,
			'retest_noise': self.retest_noise,
			'resample_projects': self.resample_projects,
			'reprediction_selection': self.reprediction_selection,
			'output_dir': self.output_dir,
			'nprocesses': self.nprocesses,
			'emit_traces': self.emit_traces,
		}


## Configuration

def _key_lines(text):
	"""Line number of every top-level key of a YAML mapping."""
	try:
		node = yaml.compose(text, Loader=yaml.SafeLoader)
	except yaml.YAMLError:
		return {}
	if not isinstance(node, yaml.MappingNode):
		return {}
	return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}

def _merge(base, overrides):
	merged = dict(base)
	for key, value in overrides.items():
		if key in ('dataset', 'synthetic') and isinstance(value, dict) and isinstance(merged.get(key), dict):
			merged[key] = {**merged[key], **value}
		else:
			merged[key] = value
	return merged

def _preset_settings(name):
	try:
		settings = get_experiment_preset(DEFAULT_PRESET)
		if name != DEFAULT_PRESET:
			settings = _merge(settings, get_experiment_preset(name))
	except KeyError as e:
		raise ConfigurationError(str(e.args[0]), field='preset') from None
	return settings

def parse_config(path=None, preset=None, overrides=None):
	"""
	Read an experiment configuration.

	Keys of the YAML file at `path` override the preset named by its
	`preset` key (or the `preset` argument), which in turn overrides the
	`replication` preset defaults. An empty file gives the defaults.
	`overrides` are applied last.

	Raises
	------
	ConfigurationError : on YAML errors (with line number), unknown keys
		and invalid values (naming the field)
	"""
	settings, lines = {}, {}
	if path is not None:
		if not os.path.isfile(path):
			raise FileNotFoundError(f"Configuration file {path} not found.")
		with open(path, 'r', encoding='utf-8') as f:
			text = f.read()
		try:
			settings = yaml.safe_load(text)
		except yaml.YAMLError as e:
			mark = getattr(e, 'problem_mark', None)
			raise ConfigurationError(f"cannot parse {path}: {getattr(e, 'problem', e)}",
									 line=mark.line + 1 if mark is not None else None) from None
		if settings is None:
			settings = {}
		if not isinstance(settings, dict):
			raise ConfigurationError(f"{path} must contain a key-value mapping.", line=1)
		lines = _key_lines(text)

	for key in settings:
		if key not in CONFIG_KEYS:
			raise ConfigurationError(f"unknown key `{key}`", field=key, line=lines.get(key))

	base = _preset_settings(settings.get('preset') or preset or DEFAULT_PRESET)
	merged = _merge(base, {k: v for k, v in settings.items() if k != 'preset'})
	if overrides:
		merged = _merge(merged, overrides)
	merged.pop('preset', None)
	return config_from_dict(merged, lines=lines)

def _is_int(value):
	return isinstance(value, int) and not isinstance(value, bool)

def config_from_dict(settings, lines=None):
	"""Validate a complete settings mapping into an ExperimentConfig."""
	lines = lines or {}

	def fail(key, message):
		raise ConfigurationError(f"`{key}`: {message}", field=key, line=lines.get(key))

	for key in settings:
		if key not in CONFIG_KEYS:
			fail(key, "unknown key")

	dataset = settings.get('dataset')
	if isinstance(dataset, str):
		dataset = {'directory': dataset}
	if dataset is not None:
		if not isinstance(dataset, dict) or 'directory' not in dataset:
			fail('dataset', "expected null, a directory or a mapping with `directory`")
		for key in dataset:
			if key not in DATASET_KEYS:
				fail('dataset', f"unknown key `{key}`")
		if dataset['directory'] == SITE_DATASET:
			if not getattr(site_config, 'dataset_dir', None):
				fail('dataset', "`site` needs `dataset_dir` in config.py")
			dataset = {**dataset, 'directory': site_config.dataset_dir}

	synthetic = dict(settings.get('synthetic') or {})
	for key in synthetic:
		if key not in SYNTHETIC_KEYS:
			fail('synthetic', f"unknown key `{key}`")

	target = settings.get('target')
	if not isinstance(target, str) or not target:
		fail('target', "expected a project name")

	sizes = settings.get('sizes')
	if isinstance(sizes, int):
		sizes = [sizes]
	if not isinstance(sizes, list) or not sizes or not all(_is_int(k) and k >= 2 for k in sizes):
		fail('sizes', f"expected a list of integers >= 2, got {sizes!r}")
	if len(set(sizes)) != len(sizes):
		fail('sizes', "duplicate sizes")

	policies = settings.get('policies')
	if not isinstance(policies, list) or not policies:
		fail('policies', "expected a non-empty list")
	try:
		policies = [parse_policy(p) for p in policies]
	except ValueError as e:
		fail('policies', str(e))
	if len({p.name for p in policies}) != len(policies):
		fail('policies', "duplicate policies")

	approaches = settings.get('approaches')
	if not isinstance(approaches, list) or not approaches:
		fail('approaches', "expected a non-empty list")
	try:
		approaches = [parse_approach(a) for a in approaches]
	except ValueError as e:
		fail('approaches', str(e))
	if BASELINE not in approaches:
		fail('approaches', "the baseline approach is required")
	if len({a.kind for a in approaches}) != len(approaches):
		fail('approaches', "each approach kind may appear once")
	approaches = sorted(approaches, key=lambda a: a.passes)

	repetitions = settings.get('repetitions')
	if not _is_int(repetitions) or repetitions < 1:
		fail('repetitions', f"expected an integer >= 1, got {repetitions!r}")

	p_overlook = settings.get('p_overlook')
	if isinstance(p_overlook, bool) or not isinstance(p_overlook, (int, float)) or not 0. <= p_overlook <= 1.:
		fail('p_overlook', f"expected a probability in [0, 1], got {p_overlook!r}")

	seed = settings.get('seed')
	if not _is_int(seed) or not 0 <= seed < 2 ** 64:
		fail('seed', f"expected a 64-bit non-negative integer, got {seed!r}")

	reward_auc = settings.get('reward_auc', 'binary')
	if reward_auc not in REWARD_MODES:
		fail('reward_auc', f"expected one of {REWARD_MODES}, got {reward_auc!r}")

	selection = settings.get('reprediction_selection', 'greedy')
	if selection not in RESELECTION_MODES:
		fail('reprediction_selection', f"expected one of {RESELECTION_MODES}, got {selection!r}")

	for key in ('retest_noise', 'resample_projects', 'emit_traces'):
		if key in settings and not isinstance(settings[key], bool):
			fail(key, f"expected true or false, got {settings[key]!r}")

	nprocesses = settings.get('nprocesses')
	if nprocesses is not None and (not _is_int(nprocesses) or nprocesses < 1):
		fail('nprocesses', f"expected null or a positive integer, got {nprocesses!r}")

	output_dir = settings.get('output_dir')
	if output_dir is not None and not isinstance(output_dir, str):
		fail('output_dir', "expected null or a directory")

	return ExperimentConfig(target=target,
							sizes=tuple(sizes),
							policies=tuple(policies),
							approaches=tuple(approaches),
							repetitions=repetitions,
							p_overlook=float(p_overlook),
							seed=seed,
							dataset_dir=None if dataset is None else dataset['directory'],
							label_column=(dataset or {}).get('label_column', DEFAULT_LABEL_COLUMN),
							id_column=(dataset or {}).get('id_column', DEFAULT_ID_COLUMN),
							synthetic=synthetic,
							reward_auc=reward_auc,
							retest_noise=settings.get('retest_noise', True),
							resample_projects=settings.get('resample_projects', True),
							reprediction_selection=selection,
							output_dir=output_dir,
							nprocesses=nprocesses,
							emit_traces=settings.get('emit_traces', False))


## Projects and arms

def build_registry(config):
	"""Load the dataset directory or synthesize a registry from the configured suite."""
	if config.dataset_dir is not None:
		return load_registry(config.dataset_dir, config.target,
							 label_column=config.label_column, id_column=config.id_column)
	synthetic = dict(config.synthetic)
	try:
		suite = get_synthetic_suite(synthetic.pop('suite', 'defectdata_like'))
	except KeyError as e:
		raise ConfigurationError(str(e.args[0]), field='synthetic') from None
	return generate_synthetic_registry(suite, target_name=config.target,
									   rng=substream(config.seed, 'synthetic'), **synthetic)

def learning_projects_for(config, registry, n_projects, repetition):
	"""Learning project names of a repetition; shared by all policies."""
	if config.resample_projects:
		seed = repetition_seed(config.seed, n_projects, repetition)
	else:
		seed = mix_seed(config.seed, n_projects)
	return select_learning_projects(registry, n_projects, substream(seed, 'projects'))

def repetition_seeds(config, n_projects, repetition):
	seed = repetition_seed(config.seed, n_projects, repetition)
	seeds = {'repetition': seed}
	seeds.update({name: substream_seed(seed, name) for name in STREAMS if name != 'synthetic'})
	return seeds


@dataclass
class RepetitionOutcome:
	result: RepetitionResult
	baseline: object
	approach_runs: dict


def run_repetition(config, registry, models, policy, n_projects, repetition):
	"""
	Baseline and every retesting approach of one repetition.

	`models` maps project names to trained models; drawn projects without
	a model are dropped.

	Raises
	------
	TrainingError : fewer than 2 of the drawn projects have a model
	InvariantError : the approaches broke the paired trace or found fewer defects
	"""
	policy = parse_policy(policy)
	seed = repetition_seed(config.seed, n_projects, repetition)
	names = learning_projects_for(config, registry, n_projects, repetition)
	arms = [models[n] for n in names if n in models]
	if len(arms) < 2:
		raise TrainingError(f"fewer than 2 arms: {len(arms)} of the drawn projects {names} have a model")

	target = registry.target
	order = make_order(target.n_modules, substream(seed, 'order'))
	baseline = run_baseline(arms, target, order, policy, config.overlook,
							substream(seed, 'policy'), noise_rng=substream(seed, 'noise'),
							reward=config.reward_auc, seeds=repetition_seeds(config, n_projects, repetition))
	criteria = {BASELINE.name: evaluate_run(baseline)}
	approach_runs = {}
	for approach in config.approaches:
		if approach == BASELINE:
			continue
		run, log = run_approach(baseline, arms, approach, config.retest_overlook, substream(seed, 'retest'),
								reselection=config.reprediction_selection, policy=policy)
		criteria[approach.name] = evaluate_run(run, retests=count_retests(log))
		approach_runs[approach.name] = (run, log)

	check_paired(baseline, criteria)
	result = RepetitionResult(repetition=repetition,
							  policy=policy.name,
							  n_projects=n_projects,
							  criteria=criteria,
							  seeds=baseline.seeds,
							  cases=case_counts(baseline),
							  learning_projects=[m.source_project for m in arms])
	return RepetitionOutcome(result=result, baseline=baseline, approach_runs=approach_runs)

def check_paired(baseline, criteria):
	"""The baseline is untouched by the approaches and found defects never drop along them."""
	if evaluate_run(baseline) != criteria[BASELINE.name]:
		raise InvariantError("A retesting approach modified the shared baseline run.")
	found = [c.found_defects for c in criteria.values()]
	if any(a > b for a, b in zip(found, found[1:])):
		raise InvariantError(f"Found defects decreased along the approaches: {dict(zip(criteria, found))}")

def run_single_repetition(config, policy, n_projects, repetition, registry=None, models=None):
	"""Reproduce one repetition in isolation; trains only the drawn projects when `models` is None."""
	if registry is None:
		registry = build_registry(config)
	if models is None:
		names = learning_projects_for(config, registry, n_projects, repetition)
		models, _ = train_models([registry.projects[n] for n in names])
	return run_repetition(config, registry, models, policy, n_projects, repetition)


## Experiment

_WORKER = {}

def _init_worker(config, registry, models):
	_WORKER.update(config=config, registry=registry, models=models)

def _do_task(task):
	try:
		outcome = run_repetition(_WORKER['config'], _WORKER['registry'], _WORKER['models'], *task)
	except TrainingError as e:
		return task, None, str(e)
	if not _WORKER['config'].emit_traces:
		outcome.baseline = None
		outcome.approach_runs = {}
	return task, outcome, None


@dataclass
class ExperimentOutcome:
	config: ExperimentConfig
	results: list
	rows: list
	cube: object
	manifest: dict
	aborted: list = field(default_factory=list)
	outcomes: list = field(default_factory=list)


def run_experiment(config, output_dir=None, show_progress=False):
	"""
	Run the whole (size x policy x repetition) matrix.

	Arm models are trained once per learning project. A (policy, size)
	cell in which some repetition keeps fewer than 2 arms is aborted and
	left out of the reports. Reports, manifest and results cube are
	written to `output_dir` (default: the config's `output_dir`) when set.
	"""
	registry = build_registry(config)
	for k in config.sizes:
		if k > len(registry.learning_names):
			raise ConfigurationError(f"size {k} exceeds the {len(registry.learning_names)} learning projects",
									 field='sizes')
	nprocesses = config.nprocesses if config.nprocesses is not None else site_config.nprocesses
	models, failures = train_models([registry.projects[n] for n in registry.learning_names],
									nprocesses=nprocesses, show_progress=show_progress)

	tasks = [(policy.name, k, r) for k in config.sizes for policy in config.policies
			 for r in range(config.repetitions)]
	logger.info("%d repetitions have been collected. Starting running them on %s.",
				len(tasks),
				("%d processes" % nprocesses)
				if nprocesses is not None
				else "all processors")

	if nprocesses == 1:
		_init_worker(config, registry, models)
		maybe_progressbar = make_optional_progressbar(show_progress, 'Repetitions', len(tasks))
		done = [_do_task(t) for t in maybe_progressbar(tasks)]
	else:
		pool = Pool(processes=nprocesses, initializer=_init_worker, initargs=(config, registry, models))
		try:
			done = pool.map(_do_task, tasks)
		except Exception as e:
			pool.terminate()
			logger.info("The experiment has been interrupted by an exception.")
			raise e
		pool.close()
		pool.join()

	aborted = {}
	for (policy, k, r), outcome, reason in done:
		if outcome is None and (policy, k) not in aborted:
			logger.warning("Aborting cell %s with %d projects: repetition %d has %s", policy, k, r, reason)
			aborted[(policy, k)] = reason
	outcomes = [o for (policy, k, _), o, _ in done if (policy, k) not in aborted]
	results = [o.result for o in outcomes]
	if not results:
		raise TrainingError("Every cell of the experiment was aborted.")

	rows = aggregate(results)
	cube = results_cube(results)
	manifest = build_manifest(config, registry, results, failures, aborted)
	outcome = ExperimentOutcome(config=config, results=results, rows=rows, cube=cube, manifest=manifest,
								aborted=sorted(aborted), outcomes=outcomes if config.emit_traces else [])

	output_dir = output_dir or config.output_dir
	if output_dir is not None:
		write_reports(outcome, output_dir)
	return outcome

def build_manifest(config, registry, results, failures, aborted):
	return {
		'version': __version__,
		'config': config.to_dict(),
		'target': registry.target_name,
		'fingerprints': registry.fingerprints(),
		'untrainable_projects': dict(sorted(failures.items())),
		'aborted_cells': [{'policy': p, 'n_projects': k, 'reason': reason}
						  for (p, k), reason in sorted(aborted.items())],
		'repetitions': [{'policy': r.policy,
						 'n_projects': r.n_projects,
						 'repetition': r.repetition,
						 'seeds': dict(r.seeds),
						 'learning_projects': list(r.learning_projects)} for r in results],
	}

def write_reports(outcome, output_dir):
	"""Write tables, manifest, results cube and (optionally) traces to `output_dir`."""
	os.makedirs(output_dir, exist_ok=True)
	path = lambda name: os.path.join(output_dir, name)

	report_frame(outcome.rows).to_csv(path('report_table1.csv'), index=False)
	with open(path('report_table1.txt'), 'w', encoding='utf-8') as f:
		f.write(format_table(outcome.rows))
	table2 = baseline_table(outcome.cube)
	table2.to_csv(path('report_table2.csv'), index=False)
	with open(path('report_table2.txt'), 'w', encoding='utf-8') as f:
		f.write(format_baseline_table(table2))
	retests_table(outcome.cube).to_csv(path('report_retests.csv'), index=False)
	cases_table(outcome.cube).to_csv(path('report_cases.csv'), index=False)
	with open(path('manifest.txt'), 'w', encoding='utf-8') as f:
		yaml.safe_dump(outcome.manifest, f, sort_keys=False)
	outcome.cube.to_netcdf(path('results.nc'), engine='netcdf4')

	for o in outcome.outcomes:
		emit_repetition_traces(o, os.path.join(output_dir, 'traces'))
	logger.info("Reports of %d repetitions written to %s", len(outcome.results), output_dir)


## Traces

def trace_name(policy, n_projects, repetition):
	return '{}_k{}_r{:03d}.csv'.format(policy.replace(':', '-'), n_projects, repetition)

def emit_trace(run, path, retest_log=None):
	"""
	Write the testing trace of `run` to `path`.

	With a `retest_log` its entries go to `<stem>-retest.csv` (header only
	when nothing was re-predicted). Returns the written paths.
	"""
	directory = os.path.dirname(path)
	if directory:
		os.makedirs(directory, exist_ok=True)
	trace_frame(run).to_csv(path, index=False)
	paths = [path]
	if retest_log is not None:
		retest_path = os.path.splitext(path)[0] + '-retest.csv'
		retest_frame(run, retest_log).to_csv(retest_path, index=False)
		paths.append(retest_path)
	logger.debug("Trace written to %s", path)
	return paths

def emit_repetition_traces(outcome, directory):
	"""Baseline trace plus final trace and retest log of every approach of one repetition."""
	r = outcome.result
	path = os.path.join(directory, trace_name(r.policy, r.n_projects, r.repetition))
	stem = os.path.splitext(path)[0]
	written = emit_trace(outcome.baseline, path)
	for name, (run, log) in outcome.approach_runs.items():
		written += emit_trace(run, '{}-{}.csv'.format(stem, name.replace(':', '')), log)
	return written

def read_trace(path):
	return pd.read_csv(path, keep_default_na=False)

def replay_confusion(trace, retest_trace=None):
	"""
	Recount every arm's (tp, fp, tn, fn) from trace tables.

	Each tested module scores every arm against its recorded result; each
	retested module again against its retest result.
	"""
	arms = [c[len('pred_'):] for c in trace.columns if c.startswith('pred_')]
	counts = {a: [0, 0, 0, 0] for a in arms}

	def score(predictions, results):
		for arm in arms:
			for predicted, recorded in zip(predictions['pred_' + arm] == 'DE', results == 'DE'):
				counts[arm][(not predicted) * 2 + (predicted != recorded)] += 1

	score(trace, trace['test_result'])
	if retest_trace is not None and len(retest_trace):
		retested = retest_trace[retest_trace['retest_result'] != '']
		score(retested, retested['retest_result'])
	return [tuple(counts[a]) for a in arms]
