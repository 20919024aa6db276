from setuptools import setup, find_packages

#####
# setup_tools install info
setup(
    name='metacloud',
    version='0.1.0',
    description='scaled sample clouds of meta distributions with heavy-tailed and light-tailed marginals',
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    install_requires=['numpy', 'scipy>=1.9', 'pydantic>=2', 'pyyaml', 'matplotlib', 'tqdm'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['metacloud = metacloud.cli:main']},
    python_requires='>=3.8',
)
