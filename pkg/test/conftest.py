import numpy as np
import pytest

from banditcpdp.dataset import ProjectDataset, ProjectRegistry, generate_synthetic_project
from banditcpdp.learner import DefectModel, FeatureSubset, StandardizationParams


def scripted_model(name, index, n_arms, sign=1.):
	"""Model predicting defective iff metric `a<index>` is positive (negative with sign=-1)."""
	return DefectModel(source_project=name,
					   metric_schema=tuple('a{}'.format(i) for i in range(n_arms)),
					   standardization=StandardizationParams(mean=np.zeros(n_arms), scale=np.ones(n_arms)),
					   subset=FeatureSubset(indices=(index,), merit=1.),
					   weights=np.array([10. * sign]),
					   bias=0.)


@pytest.fixture
def make_scripted():
	"""
	Factory: (labels, predictions) -> (target, models), where predictions[i][m]
	is the defective/clean prediction of arm i for module m.
	"""
	def make(labels, predictions, names=None):
		predictions = np.asarray(predictions, dtype=bool)
		n_arms, n_modules = predictions.shape
		features = np.where(predictions.T, 1., -1.)
		target = ProjectDataset('target', ['a{}'.format(i) for i in range(n_arms)],
								['t{}'.format(m) for m in range(n_modules)],
								features, np.asarray(labels, dtype=int))
		names = names or ['model{}'.format(chr(ord('A') + i)) for i in range(n_arms)]
		models = [scripted_model(names[i], i, n_arms) for i in range(n_arms)]
		return target, models
	return make


@pytest.fixture
def oracle_pair(make_scripted):
	"""20 modules, arm 0 always right, arm 1 always wrong."""
	labels = np.array([1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0])
	truth = labels.astype(bool)
	return make_scripted(labels, [truth, ~truth])


@pytest.fixture
def small_registry():
	rng = np.random.default_rng(5)
	projects = [generate_synthetic_project('target', 80, 0.2, 4, 1.0, rng)]
	for i in range(6):
		projects.append(generate_synthetic_project('p{}'.format(i), 100, 0.25, 4, 0.8, rng))
	return ProjectRegistry(projects, 'target')


@pytest.fixture
def ck_csv(tmp_path):
	path = tmp_path / 'ant.csv'
	path.write_text('name,version,wmc,dit,cbo,bug\n'
					'org.A,ant-1.7,10,2,5,0\n'
					'org.B,ant-1.7,3,1,1,3\n'
					'org.C,ant-1.7,25,4,12,1\n'
					'org.D,ant-1.7,7,1,4,0\n')
	return path
