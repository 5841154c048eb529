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

from codecs import open #pylint: disable=redefined-builtin
from setuptools import setup, find_packages

requirement_list = ['numpy',
					'scipy',
					'pandas>=1.5',
					'xarray>=0.18',
					'netcdf4',
					'toolz',
					'pyyaml',
					'progressbar2']

with open('README.md', encoding='utf-8') as f:
	long_description = f.read()

exec(open('banditcpdp/_version.py').read()) #pylint: disable=exec-used

setup(
	name='banditcpdp',
	version=__version__, #pylint: disable=undefined-variable
	author='The banditcpdp developers',
	description='Bandit-based Cross-Project Defect Prediction and Retest Simulation Tools',
	long_description=long_description,
	long_description_content_type='text/markdown',
	license='GPLv3',
	packages=find_packages(exclude=['doc', 'test']),
	include_package_data=True,
	package_data={'banditcpdp': ['resources/*/*.yaml', 'config-default.py']},
	install_requires=requirement_list,
	extras_require={'test': ['pytest']},
	entry_points={'console_scripts': ['banditcpdp=banditcpdp.__main__:main']},
	python_requires='>=3.9',
	classifiers=[
		'Development Status :: 3 - Alpha',
		'Environment :: Console',
		'Intended Audience :: Science/Research',
		'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
		'Natural Language :: English',
		'Operating System :: OS Independent',
	])
