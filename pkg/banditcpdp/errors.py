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


class DatasetError(ValueError):
	"""A project file could not be read or violates the module schema."""


class ConfigurationError(ValueError):
	"""Invalid experiment configuration or learning project request."""

	def __init__(self, message, field=None, line=None):
		if line is not None:
			message = f"line {line}: {message}"
		super().__init__(message)
		self.field = field
		self.line = line


class SelectionError(ValueError):
	"""Feature selection is impossible on the given labels."""


class TrainingError(RuntimeError):
	"""Logistic training failed, or too few arms remain for a bandit."""


class UndefinedRatioError(ArithmeticError):
	"""Relative difference against a zero criterion."""


class InvariantError(AssertionError):
	"""A simulation run broke one of its stated invariants."""
