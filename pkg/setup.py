#!/usr/bin/env python3
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from setuptools import setup, find_packages
import sys


if sys.version_info < (3, 6):
    sys.exit('Sorry, Python >= 3.6 is required for retinakit.')

with open('README.md') as f:
    readme = f.read()


setup(
    name='retinakit',
    version='0.1.0',
    description='Retinal fundus disease classification, attention masks and anomaly detection on a numpy autograd',
    classifiers=[
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3.6',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
    ],
    long_description=readme,
    long_description_content_type='text/markdown',
    install_requires=[
        'numpy',
        'Pillow',
        'scipy',
        'tqdm',
    ],
    packages=find_packages(exclude=['tests']),
    test_suite='tests',
    entry_points={
        'console_scripts': [
            'retinakit = retinakit_cli.main:cli_main',
            'retinakit-train = retinakit_cli.train:cli_main',
        ],
    },
)
