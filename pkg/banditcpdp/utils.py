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

import numpy as np
import progressbar as pgb

MASK64 = (1 << 64) - 1

# Named random sub-streams of one repetition. Ids are part of the seed
# derivation and must never be renumbered.
STREAMS = {
	'projects': 1,
	'order': 2,
	'policy': 3,
	'noise': 4,
	'retest': 5,
	'synthetic': 6,
}

def make_optional_progressbar(show, prefix, max_value):
	if show:
		widgets = [
			pgb.widgets.Percentage(),
			' ', pgb.widgets.SimpleProgress(),
			' ', pgb.widgets.Bar(),
			' ', pgb.widgets.Timer(),
			' ', pgb.widgets.ETA()
		]
		if not prefix.endswith(": "):
			prefix = prefix.strip() + ": "
		maybe_progressbar = pgb.ProgressBar(prefix=prefix, widgets=widgets, max_value=max_value)
	else:
		maybe_progressbar = lambda x: x

	return maybe_progressbar

def splitmix64(x):
	"""One SplitMix64 step: a bijective 64-bit finalizer."""
	x = (x + 0x9E3779B97F4A7C15) & MASK64
	x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
	x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
	return x ^ (x >> 31)

def mix_seed(seed, *keys):
	"""
	Derive a 64-bit seed from `seed` and integer `keys`.

	h0 = splitmix64(seed), h(i+1) = splitmix64(h(i) xor key(i)). Keys are
	reduced modulo 2**64. Order of keys matters.
	"""
	h = splitmix64(int(seed) & MASK64)
	for key in keys:
		h = splitmix64(h ^ (int(key) & MASK64))
	return h

def repetition_seed(master_seed, n_projects, repetition):
	# policies of the same (size, repetition) share learning sets and order
	return mix_seed(master_seed, n_projects, repetition)

def substream_seed(seed, name):
	if name not in STREAMS:
		raise KeyError(f"Unknown random stream `{name}`. Known: {sorted(STREAMS)}")
	return mix_seed(seed, STREAMS[name])

def substream(seed, name):
	"""Independent numpy Generator for the named stream of `seed`."""
	return np.random.default_rng(substream_seed(seed, name))
