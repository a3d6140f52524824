"""
Experiment catalog.

Each experiment names the parameters it needs in the [params] table of a
config and the defaults used for the rest.
"""

from typing import Any, Dict, List, TypedDict

from fpp_lab.errors import ConfigError


class ExperimentInfo(TypedDict):
    """Type definition for an experiment entry."""
    name: str
    description: str
    required: List[str]
    defaults: Dict[str, Any]


# Reference-μ parameters shared by every experiment that measures deviations
_FAN = {'fan_norm': 4, 'fan_n': 5, 'mu_replicas': 100, 'mu_seed': 0}
_POINT_MU = {'mu_n_grid': [4, 8, 16], 'mu_replicas': 100, 'mu_seed': 0}


EXPERIMENTS: Dict[str, ExperimentInfo] = {
    'mu': {
        'name': 'Time constant',
        'description': 'T(0, n z)/n over a grid of n, replica mean and CI at the largest n.',
        'required': ['z'],
        'defaults': {'n_grid': [4, 8, 16]},
    },
    'tails': {
        'name': 'Deviation tails',
        'description': 'P(T(0,z) - mu(z) < -eps x) and P(T(0,z) - mu(z) > eps x) with tail fits.',
        'required': ['z', 'epsilon', 'x_grid'],
        'defaults': {'side': 'both', **_POINT_MU},
    },
    'shells': {
        'name': 'White shells',
        'description': 'Shell completion, structure checks, diameter tail and the shell comparison.',
        'required': ['delta'],
        'defaults': {'pair_offset': None, 'k_grid': [4, 6, 8, 10, 12]},
    },
    'regen': {
        'name': 'Regeneration',
        'description': 'Regeneration levels along a cylinder, segment times and the sandwich.',
        'required': ['z', 'r'],
        'defaults': {'tbar_quantile': 0.9, 'm_max': 50, 'with_full_time': True},
    },
    'deviation-sets': {
        'name': 'Deviation sets',
        'description': 'Size of Z_eps and measure of T_eps per realization, with lower-bound chains.',
        'required': ['epsilon'],
        'defaults': {'grid_step': 0.05, **_FAN},
    },
    'hre-sum': {
        'name': 'Point-sum dichotomy',
        'description': 'Nested partial sums over |z| <= R of |z|^(alpha-d) P(|T - mu| > eps|z|).',
        'required': ['alpha', 'epsilon', 'radii'],
        'defaults': {'big_m': 1.0, **_FAN},
    },
    'radial-sum': {
        'name': 'Radial-sum dichotomy',
        'description': 'Nested partial sums over n of n^(alpha-1) P(|T(0,nz) - n mu(z)| > eps n).',
        'required': ['z', 'alpha', 'epsilon', 'checkpoints'],
        'defaults': {**_POINT_MU},
    },
    'lp': {
        'name': 'L^p error',
        'description': 'E|T(0,z) - mu(z)|^p / |z|^p over a grid of points.',
        'required': ['p', 'z_grid'],
        'defaults': {**_FAN},
    },
    'point-to-shape': {
        'name': 'Point-to-shape',
        'description': 'Exit time of the mu-ball of radius n divided by n.',
        'required': ['n_grid'],
        'defaults': {**_FAN},
    },
    'tube-sweep': {
        'name': 'Tube constants',
        'description': 'Cylinder-restricted time constants over increasing radii on coupled fields.',
        'required': ['z', 'radii', 'n'],
        'defaults': {},
    },
    'y-records': {
        'name': 'Y records',
        'description': 'Even distances n with some |z| = n and Y(z) > beta n.',
        'required': ['beta'],
        'defaults': {'epsilon': None, **_FAN},
    },
    'annulus': {
        'name': 'Annulus crossing',
        'description': 'P(T(B_l, outside B_(l+m)) < m(1 - eps)) with l = floor(eta m).',
        'required': ['m_values', 'eta', 'epsilon'],
        'defaults': {**_FAN},
    },
    'cylinder-tail': {
        'name': 'Cylinder tail',
        'description': 'P(T_C(0,z) > 9|z|x) against the Y-tail bound.',
        'required': ['z', 'r', 'x_grid'],
        'defaults': {},
    },
    'min-moment': {
        'name': 'Min-moment inequality',
        'description': 'Both sides of the moment inequality for minima of i.i.d. sums.',
        'required': ['K', 'L', 'alpha', 'beta'],
        'defaults': {'N': 1},
    },
    'off-lattice': {
        'name': 'Off-lattice limit',
        'description': 'T(0, round(n x))/n against the homogeneous extension mu(x).',
        'required': ['x', 'n_grid'],
        'defaults': {**_FAN},
    },
}


def get_experiment(name: str) -> ExperimentInfo:
    """
    Get the catalog entry for an experiment.

    Raises:
        ConfigError: If the experiment is unknown
    """
    if name not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment '{name}'; choose one of {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name]


def experiment_names() -> List[str]:
    return list(EXPERIMENTS)


def resolve_params(name: str, params: Dict[str, Any]) -> Dict[str, Any]:
    """
    Experiment defaults overlaid with the given params.

    Raises:
        ConfigError: If a required parameter is missing
    """
    info = get_experiment(name)
    missing = [key for key in info['required'] if key not in params]
    if missing:
        raise ConfigError(f"Experiment '{name}' needs params {missing}")
    return {**info['defaults'], **params}
