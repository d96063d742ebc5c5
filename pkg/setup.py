#!/usr/bin/env python
from setuptools import setup, find_packages

setup(
    name='stablemild',
    version='0.1.0',
    description='Mild solutions of stochastic equations driven by stable noise, checked against their analytic bounds',

    author='John Hopper',
    author_email='john.hopper@jpserver.net',

    packages=find_packages(exclude=('tests', 'tests.*')),
    package_data={'stablemild': ['scenarios/*.ini']},

    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.9',
    ],
    extras_require={
        'test': ['pytest', 'mypy'],
    },

    entry_points={
        'console_scripts': [
            'stablemild = stablemild.cli:main',
        ],
    },

    license='MIT'
)
