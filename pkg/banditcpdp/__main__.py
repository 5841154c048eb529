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

Command line: `banditcpdp run | trace | selftest`.
"""

import argparse
import logging
import sys

from . import config as site_config #pylint: disable=E0611
from ._version import __version__
from .errors import ConfigurationError, DatasetError, InvariantError, TrainingError
from .experiment import emit_repetition_traces, parse_config, run_experiment, run_single_repetition
from .selftest import run_selftest, SUITES

logger = logging.getLogger(__name__)

EXIT_SELFTEST_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_RUN_ERROR = 3


def build_parser():
	parser = argparse.ArgumentParser(prog='banditcpdp',
									 description='Bandit-based cross-project defect prediction and retest simulation.')
	parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
	verbosity = parser.add_mutually_exclusive_group()
	verbosity.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
	verbosity.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')
	sub = parser.add_subparsers(dest='command', required=True)

	def add_config_args(p):
		p.add_argument('--config', help='experiment configuration (YAML)')
		p.add_argument('--preset', help='shipped preset the configuration starts from')
		p.add_argument('--seed', type=int, help='override the master seed')
		p.add_argument('--output', help='output directory')

	run = sub.add_parser('run', help='run the full experiment and write reports')
	add_config_args(run)
	run.add_argument('--nprocesses', type=int, help='processes for concurrent repetitions')
	run.add_argument('--traces', action='store_true', help='also write every repetition trace')

	trace = sub.add_parser('trace', help='replay a single repetition and write its traces')
	add_config_args(trace)
	trace.add_argument('--policy', required=True, help='e.g. epsilon:0.1 or ucb')
	trace.add_argument('--size', type=int, required=True, help='number of learning projects')
	trace.add_argument('--repetition', type=int, required=True, help='repetition index (from 0)')

	selftest = sub.add_parser('selftest', help='run the property suites')
	selftest.add_argument('--quick', action='store_true', help='reduced instance counts')
	selftest.add_argument('--suite', action='append', choices=sorted(SUITES), help='run only this suite')
	return parser

def _load_config(args, **overrides):
	if args.seed is not None:
		overrides['seed'] = args.seed
	return parse_config(args.config, preset=args.preset, overrides=overrides)

def cmd_run(args):
	overrides = {}
	if args.nprocesses is not None:
		overrides['nprocesses'] = args.nprocesses
	if args.traces:
		overrides['emit_traces'] = True
	config = _load_config(args, **overrides)
	output_dir = args.output or config.output_dir or site_config.output_dir
	outcome = run_experiment(config, output_dir=output_dir, show_progress=not args.quiet)
	logger.info("%d repetitions in %d report rows, %d aborted cells",
				len(outcome.results), len(outcome.rows), len(outcome.aborted))
	return 0

def cmd_trace(args):
	config = _load_config(args)
	outcome = run_single_repetition(config, args.policy, args.size, args.repetition)
	output_dir = args.output or site_config.trace_dir
	written = emit_repetition_traces(outcome, output_dir)
	for p in written:
		print(p)
	for name, criteria in outcome.result.criteria.items():
		print("{}: auc={:.4f} found_defects={} retests={}".format(
			name, criteria.auc, criteria.found_defects, criteria.retests))
	return 0

def cmd_selftest(args):
	report = run_selftest(quick=args.quick, suites=args.suite)
	failed = [name for name, failures in report.items() if failures]
	for name, failures in report.items():
		print("{:<20} {}".format(name, 'FAILED ({})'.format(len(failures)) if failures else 'ok'))
	return EXIT_SELFTEST_FAILED if failed else 0

COMMANDS = {'run': cmd_run, 'trace': cmd_trace, 'selftest': cmd_selftest}

def main(argv=None):
	args = build_parser().parse_args(argv)
	if args.verbose:
		level = logging.DEBUG
	elif args.quiet:
		level = logging.WARNING
	else:
		level = getattr(logging, str(site_config.log_level).upper(), logging.INFO)
	logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

	try:
		return COMMANDS[args.command](args)
	except (DatasetError, ConfigurationError, FileNotFoundError) as e:
		logger.error("%s", e)
		return EXIT_INPUT_ERROR
	except (TrainingError, InvariantError) as e:
		logger.error("%s", e)
		return EXIT_RUN_ERROR

if __name__ == '__main__':
	sys.exit(main())
