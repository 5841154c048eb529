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

import importlib.util
import os
import sys

def _load_site_config():
	# config.py is created by the user from config-default.py
	name = __name__ + '.config'
	here = os.path.dirname(os.path.abspath(__file__))
	path = os.path.join(here, 'config.py')
	if not os.path.isfile(path):
		path = os.path.join(here, 'config-default.py')
	spec = importlib.util.spec_from_file_location(name, path)
	module = importlib.util.module_from_spec(spec)
	sys.modules[name] = module
	spec.loader.exec_module(module)
	return module

config = _load_site_config()

from .dataset import ProjectDataset, ProjectRegistry, load_project, load_registry, generate_synthetic_registry
from .learner import DefectModel, train_model, train_models
from .bandit import ArmState, EpsilonGreedy, UCB, parse_policy, select_arm
from .simulator import OverlookModel, SimulationRun, run_baseline
from .reprediction import ApproachKind, parse_approach, run_approach
from .evaluation import aggregate, wilcoxon_signed_rank
from .experiment import ExperimentConfig, parse_config, run_experiment, run_single_repetition
from ._version import __version__

__author__ = "The banditcpdp developers"
__copyright__ = "GNU GPL 3 license"
