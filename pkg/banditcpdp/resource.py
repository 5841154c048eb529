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
from importlib import resources
import yaml

logger = logging.getLogger(name=__name__)

def _resource_dir(kind):
	return resources.files(__package__).joinpath('resources').joinpath(kind)

def list_presets(kind):
	"""Names of the YAML presets shipped under resources/`kind`."""
	return sorted(entry.name[:-len('.yaml')]
				  for entry in _resource_dir(kind).iterdir()
				  if entry.name.endswith('.yaml'))

def _load_preset(kind, name):
	res = _resource_dir(kind).joinpath(name + ".yaml")
	if not res.is_file():
		raise KeyError(f"No {kind} preset `{name}`. Available: {list_presets(kind)}")
	with res.open('r', encoding='utf-8') as f:
		conf = yaml.safe_load(f)
	logger.debug("Loaded %s preset %s", kind, name)
	return conf if conf is not None else {}

def get_experiment_preset(name='replication'):
	"""Load the 'name'.yaml experiment preset and provide a settings dict."""
	return _load_preset('experiment', name)

def get_synthetic_suite(name='defectdata_like'):
	"""
	Load a synthetic project suite.

	A suite names the metric schema, the learning projects and the ranges
	from which per-project module counts, defect rates and signal
	strengths are drawn.
	"""
	suite = _load_preset('synthetic', name)
	for key in ('metrics', 'projects', 'modules', 'defect_rate', 'signal'):
		if key not in suite:
			raise KeyError(f"Synthetic suite `{name}` lacks `{key}`.")
	return suite
