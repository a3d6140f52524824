from setuptools import find_packages, setup

from fpp_lab import __version__

setup(
    name='fpp-lab',
    version=__version__,
    description="First-passage percolation laboratory on Z^d",
    packages=find_packages(include=['fpp_lab', 'fpp_lab.*']),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.24.0',
        'scipy>=1.10.0',
        'tomli>=2.0.0; python_version < "3.11"',
    ],
    entry_points={
        'console_scripts': [
            'fpp-lab=fpp_lab.cli:main',
        ],
    },
)
